"""
Simple (Elman) recurrent cell:

    h = tanh(W x + U h_prev + b)
"""
import numpy as np

GATES = ("h",)
RECURRENT = ("h",)
BIASES = ("h",)
STATEFUL = True
HAS_MEMORY = False


def step(cell, fused, h_prev, c_prev, h_mask):
    hd = h_prev if h_mask is None else h_prev * h_mask
    h = np.tanh(fused + hd @ cell.U["h"] + cell.b["h"])
    return h, None, (hd, h, h_mask)


def step_backward(cell, cache, dh, dc, grads):
    hd, h, h_mask = cache
    dpre = dh * (1.0 - h * h)
    grads["U.h"] += hd.T @ dpre
    grads["b.h"] += dpre.sum(axis=0)
    dh_prev = dpre @ cell.U["h"].T
    if h_mask is not None:
        dh_prev = dh_prev * h_mask
    return dpre, dh_prev, None
