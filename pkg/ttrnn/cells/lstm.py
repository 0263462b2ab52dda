"""
Long short-term memory cell, gates in the fused order k, f, o, g:

    k, f, o = sigmoid(W_* x + U_* h_prev + b_*)
    g = tanh(W_g x + U_g h_prev + b_g)
    c = f * c_prev + k * g
    h = o * tanh(c)
"""
import numpy as np

from ttrnn.cells.core import gate_slices, sigmoid

GATES = ("k", "f", "o", "g")
RECURRENT = ("k", "f", "o", "g")
BIASES = ("k", "f", "o", "g")
STATEFUL = True
HAS_MEMORY = True


def step(cell, fused, h_prev, c_prev, h_mask):
    hd = h_prev if h_mask is None else h_prev * h_mask
    pre = [
        a + hd @ cell.U[name] + cell.b[name]
        for name, a in zip(GATES, gate_slices(fused, 4, cell.hidden_size))
    ]
    k, f, o = (sigmoid(p) for p in pre[:3])
    g = np.tanh(pre[3])
    c = f * c_prev + k * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (hd, c_prev, k, f, o, g, tc, h_mask)


def step_backward(cell, cache, dh, dc, grads):
    hd, c_prev, k, f, o, g, tc, h_mask = cache
    dc = dc + dh * o * (1.0 - tc * tc)
    dpre = {
        "k": dc * g * k * (1.0 - k),
        "f": dc * c_prev * f * (1.0 - f),
        "o": dh * tc * o * (1.0 - o),
        "g": dc * k * (1.0 - g * g),
    }
    dhd = np.zeros_like(hd)
    for name in GATES:
        grads[f"U.{name}"] += hd.T @ dpre[name]
        grads[f"b.{name}"] += dpre[name].sum(axis=0)
        dhd += dpre[name] @ cell.U[name].T
    if h_mask is not None:
        dhd = dhd * h_mask
    fused = np.concatenate([dpre[name] for name in GATES], axis=-1)
    return fused, dhd, dc * f
