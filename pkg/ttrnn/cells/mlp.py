"""
Non-recurrent baseline: K frames of a sequence, taken in ascending temporal
order, are flattened and concatenated, then mapped to the hidden layer

    h = tanh(W [x_i1, ..., x_iK] + b)

During training the K frames are sampled at random, at evaluation they are
evenly spaced over the sequence.
"""
import numpy as np

from ttrnn.errors import ArgumentError

GATES = ("h",)
RECURRENT = ()
BIASES = ("h",)
STATEFUL = False
HAS_MEMORY = False

DEFAULT_FRAMES = 6


def frame_indices(length, n_frames, rng=None):
    """
    Sorted frame indices of one sequence: random (with replacement only when
    the sequence is shorter than `n_frames`) when `rng` is given, evenly
    spaced otherwise.
    """
    if rng is None:
        return np.rint(np.linspace(0, length - 1, n_frames)).astype(np.int64)
    replace = length < n_frames
    return np.sort(rng.choice(length, size=n_frames, replace=replace))


def encode(cell, frames, lengths, dropout, rng, return_cache=False):
    if dropout.training and rng is None:
        raise ArgumentError("Training-mode frame sampling needs a random generator")
    B = frames.shape[0]
    sample_rng = rng if dropout.training else None
    x = np.stack([
        frames[b, frame_indices(int(lengths[b]), cell.n_frames, sample_rng)].reshape(-1)
        for b in range(B)
    ])
    x_mask = dropout.mask(rng, x.shape)
    if x_mask is not None:
        x = x * x_mask
    pre, map_cache = cell.input_map.forward(x)
    h = np.tanh(pre + cell.b["h"])
    if return_cache:
        return h, {"x": x, "map": map_cache, "h": h}
    return h


def encode_backward(cell, cache, grad_h, grads):
    dpre = grad_h * (1.0 - cache["h"] ** 2)
    grads["b.h"] += dpre.sum(axis=0)
    cell.input_map.backward(cache["x"], dpre, cache["map"], grads)
    return grads
