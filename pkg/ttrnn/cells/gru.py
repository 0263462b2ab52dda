"""
Gated recurrent unit, gates in the fused order r, z, d:

    r = sigmoid(W_r x + U_r h_prev + b_r)
    z = sigmoid(W_z x + U_z h_prev + b_z)
    d = tanh(W_d x + U_d (r * h_prev))
    h = (1 - z) * h_prev + z * d

The candidate d has no bias term.
"""
import numpy as np

from ttrnn.cells.core import gate_slices, sigmoid

GATES = ("r", "z", "d")
RECURRENT = ("r", "z", "d")
BIASES = ("r", "z")
STATEFUL = True
HAS_MEMORY = False


def step(cell, fused, h_prev, c_prev, h_mask):
    a_r, a_z, a_d = gate_slices(fused, 3, cell.hidden_size)
    hd = h_prev if h_mask is None else h_prev * h_mask
    r = sigmoid(a_r + hd @ cell.U["r"] + cell.b["r"])
    z = sigmoid(a_z + hd @ cell.U["z"] + cell.b["z"])
    rh = r * hd
    d = np.tanh(a_d + rh @ cell.U["d"])
    h = (1.0 - z) * h_prev + z * d
    return h, None, (h_prev, hd, r, z, rh, d, h_mask)


def step_backward(cell, cache, dh, dc, grads):
    h_prev, hd, r, z, rh, d, h_mask = cache
    dpre_d = dh * z * (1.0 - d * d)
    dpre_z = dh * (d - h_prev) * z * (1.0 - z)
    grads["U.d"] += rh.T @ dpre_d
    drh = dpre_d @ cell.U["d"].T
    dpre_r = drh * hd * r * (1.0 - r)

    grads["U.r"] += hd.T @ dpre_r
    grads["U.z"] += hd.T @ dpre_z
    grads["b.r"] += dpre_r.sum(axis=0)
    grads["b.z"] += dpre_z.sum(axis=0)

    dhd = drh * r + dpre_r @ cell.U["r"].T + dpre_z @ cell.U["z"].T
    if h_mask is not None:
        dhd = dhd * h_mask
    dh_prev = dh * (1.0 - z) + dhd
    return np.concatenate([dpre_r, dpre_z, dpre_d], axis=-1), dh_prev, None
