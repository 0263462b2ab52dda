"""
The Tensor-Train layer: a fully connected layer y = x W + b whose weight
matrix W (M x N) is never stored, only its chain of 4-way cores

    G_k  of shape (m_k, n_k, r_{k-1}, r_k),   k = 1..d,

with M = prod(m), N = prod(n) and r_0 = r_d = 1. Entry W[l_in, l_out] is the
product of the matrices G_k[i_k, j_k] where (i_1..i_d) is the row-major
multi-index of l_in over m and (j_1..j_d) that of l_out over n.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from ttrnn.binio import read_array, read_struct, write_array, write_struct
from ttrnn.errors import FormatError, ShapeError
from ttrnn.tensor import MAX_SIZE, Shape, as_dense


@dataclass(frozen=True)
class TTShape:
    m: Tuple[int, ...]
    n: Tuple[int, ...]
    ranks: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(int(v) for v in self.m))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "ranks", tuple(int(v) for v in self.ranks))

    @property
    def d(self):
        return len(self.m)

    @property
    def M(self):
        return _prod(self.m)

    @property
    def N(self):
        return _prod(self.n)

    def core_shape(self, k):
        return (self.m[k], self.n[k], self.ranks[k], self.ranks[k + 1])

    def __str__(self):
        fmt = lambda v: "x".join(str(i) for i in v)
        return f"{fmt(self.m)} -> {fmt(self.n)} ranks {','.join(str(r) for r in self.ranks)}"


@dataclass
class TTCores:
    shape: TTShape
    cores: List[np.ndarray]

    def __post_init__(self):
        if len(self.cores) != self.shape.d:
            raise ShapeError(f"Expected {self.shape.d} cores, got {len(self.cores)}")
        for k, core in enumerate(self.cores):
            if core.shape != self.shape.core_shape(k):
                raise ShapeError(
                    f"Core {k} has shape {core.shape}, expected {self.shape.core_shape(k)}")

    @property
    def size(self):
        return sum(core.size for core in self.cores)

    def zeros_like(self):
        return TTCores(self.shape, [np.zeros_like(core) for core in self.cores])


@dataclass
class TTLayer:
    cores: TTCores
    bias: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.bias is not None and self.bias.shape != (self.shape.N,):
            raise ShapeError(
                f"Bias has shape {self.bias.shape}, expected ({self.shape.N},)")

    @property
    def shape(self):
        return self.cores.shape

    def __call__(self, x):
        return tt_forward(self, x)


def _prod(values):
    out = 1
    for v in values:
        out *= int(v)
    return out


def validate_shape(s):
    """
    Returns normally iff `s` is a valid factorization plan: d >= 1 input and
    output factors, d + 1 ranks with r_0 = r_d = 1, and no zero extent.
    """
    d = len(s.m)
    if d < 1:
        raise ShapeError("A TT shape needs at least one core")
    if len(s.n) != d:
        raise ShapeError(f"Got {d} input factors but {len(s.n)} output factors")
    if len(s.ranks) != d + 1:
        raise ShapeError(f"Expected {d + 1} ranks, got {len(s.ranks)}")
    if any(v < 1 for v in s.m + s.n + s.ranks):
        raise ShapeError(f"All factors and ranks must be >= 1: {s}")
    if s.ranks[0] != 1 or s.ranks[-1] != 1:
        raise ShapeError(f"Boundary ranks must be 1, got {s.ranks}")


def init_cores(s, seed):
    """
    Draws i.i.d. zero-mean Gaussian cores. Core k uses the standard
    deviation (2 / (M + N))^(1 / 2d) / sqrt(r_k), so the reconstructed
    matrix has Glorot entry variance 2 / (M + N).
    """
    validate_shape(s)
    rng = np.random.default_rng(seed)
    target = 2.0 / (s.M + s.N)
    cores = []
    for k in range(s.d):
        std = target ** (1.0 / (2 * s.d)) / np.sqrt(s.ranks[k + 1])
        cores.append(rng.normal(0.0, std, size=s.core_shape(k)))
    return TTCores(s, cores)


def reconstruct_entry(c, i, j):
    s = c.shape
    if len(i) != s.d or len(j) != s.d:
        raise IndexError(f"Expected {s.d} row and column indices")
    out = np.ones((1, 1))
    for k, core in enumerate(c.cores):
        if not (0 <= i[k] < s.m[k] and 0 <= j[k] < s.n[k]):
            raise IndexError(f"Index pair ({i[k]}, {j[k]}) out of range for core {k}")
        out = out @ core[i[k], j[k]]
    return float(out[0, 0])


def reconstruct_matrix(c):
    """
    Materializes the full M x N weight matrix by contracting the cores.
    Only meant for desk-scale shapes and as an oracle.
    """
    s = c.shape
    if s.M * s.N > MAX_SIZE:
        raise ShapeError(f"Full matrix of {s} does not fit the index type")
    full = c.cores[0][:, :, 0, :]
    for core in c.cores[1:]:
        rows, cols, _ = full.shape
        full = np.einsum("ijr,mnrs->imjns", full, core)
        full = full.reshape(rows * core.shape[0], cols * core.shape[1], core.shape[3])
    return full[:, :, 0]


def _contract(cores, x):
    # left-to-right sweep; returns the output and each core's input
    # in the form (B, P, r_{k-1}, m_k, Q) with P = n_1..n_{k-1}, Q = m_{k+1}..m_d
    s = cores.shape
    batch = x.shape[0]
    z = x.reshape(batch, 1, 1, s.m[0], s.M // s.m[0])
    inputs = []
    for k, core in enumerate(cores.cores):
        inputs.append(z)
        _, p, _, _, q = z.shape
        # (B, P, Q, n_k, r_k) -> (B, P, n_k, r_k, Q)
        out = np.tensordot(z, core, axes=([2, 3], [2, 0])).transpose(0, 1, 3, 4, 2)
        if k + 1 < s.d:
            m_next = s.m[k + 1]
            z = np.ascontiguousarray(out).reshape(
                batch, p * s.n[k], s.ranks[k + 1], m_next, q // m_next)
    return np.ascontiguousarray(out).reshape(batch, s.N), inputs


def _check_input(layer, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.shape.M:
        raise ShapeError(
            f"Input of shape {x.shape} does not match layer input size {layer.shape.M}")
    return x


def tt_forward(layer, x, return_inputs=False):
    """
    Computes x W + b for a batch x of shape (B, M) without materializing W.
    With `return_inputs`, also returns the intermediate tensors needed by
    tt_backward.
    """
    x = _check_input(layer, x)
    y, inputs = _contract(layer.cores, x)
    if layer.bias is not None:
        y = y + layer.bias
    if return_inputs:
        return y, inputs
    return y


def tt_backward(layer, x, grad_y, inputs=None):
    """
    Reverse-mode gradients of sum(grad_y * tt_forward(layer, x)).

    Returns (grad_cores, grad_bias, grad_x); grad_bias is None for a layer
    without bias. `inputs` may be passed from a previous
    tt_forward(..., return_inputs=True) to skip the forward sweep.
    """
    x = _check_input(layer, x)
    s = layer.shape
    grad_y = np.asarray(grad_y, dtype=np.float64)
    if grad_y.shape != (x.shape[0], s.N):
        raise ShapeError(f"grad_y has shape {grad_y.shape}, expected {(x.shape[0], s.N)}")
    if inputs is None:
        _, inputs = _contract(layer.cores, x)

    batch = x.shape[0]
    grads = [None] * s.d
    upstream = grad_y
    for k in reversed(range(s.d)):
        z = inputs[k]
        core = layer.cores.cores[k]
        _, p, _, _, q = z.shape
        upstream = np.ascontiguousarray(upstream).reshape(batch, p, s.n[k], s.ranks[k + 1], q)
        # (r_{k-1}, m_k, n_k, r_k) -> (m_k, n_k, r_{k-1}, r_k)
        grads[k] = np.tensordot(z, upstream, axes=([0, 1, 4], [0, 1, 4])).transpose(1, 2, 0, 3)
        # (B, P, Q, m_k, r_{k-1}) -> (B, P, r_{k-1}, m_k, Q)
        upstream = np.tensordot(upstream, core, axes=([2, 3], [1, 3])).transpose(0, 1, 4, 3, 2)

    grad_x = np.ascontiguousarray(upstream).reshape(batch, s.M)
    grad_bias = grad_y.sum(axis=0) if layer.bias is not None else None
    grad_cores = TTCores(s, [np.ascontiguousarray(g) for g in grads])
    return grad_cores, grad_bias, grad_x


def tt_param_count(s, gate_multiplier=1):
    """
    Number of scalars in the cores of `s` once its first output factor is
    scaled by `gate_multiplier` (1 plain layer, 3 GRU, 4 LSTM).
    """
    c = int(gate_multiplier)
    total = sum(_prod(s.core_shape(k)) for k in range(s.d))
    return total + (c - 1) * s.m[0] * s.n[0] * s.ranks[0] * s.ranks[1]


def dense_param_count(s, gate_multiplier=1):
    return int(gate_multiplier) * s.M * s.N


def compression_rate(s, gate_multiplier=1):
    """
    Exact ratio of TT to dense parameter count, as a Fraction.
    """
    return Fraction(tt_param_count(s, gate_multiplier), dense_param_count(s, gate_multiplier))


def parse_factors(text):
    """
    "8,20,20,18" or "8x20x20x18" -> (8, 20, 20, 18)
    """
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    parts = str(text).replace("x", ",").replace("*", ",").split(",")
    try:
        return tuple(int(p) for p in parts if p.strip())
    except ValueError:
        raise ShapeError(f"Invalid factor list: {text!r}")


def write_layer(fh, layer):
    s = layer.shape
    write_struct(fh, "I", s.d)
    write_struct(fh, f"{s.d}I", *s.m)
    write_struct(fh, f"{s.d}I", *s.n)
    write_struct(fh, f"{s.d + 1}I", *s.ranks)
    write_struct(fh, "B", int(layer.bias is not None))
    for core in layer.cores.cores:
        write_array(fh, core)
    if layer.bias is not None:
        write_array(fh, layer.bias)


def read_layer(fh):
    d = read_struct(fh, "I", "TT layer header")
    if not 1 <= d <= 64:
        raise FormatError(f"Implausible TT layer order {d}")
    as_tuple = lambda v: v if isinstance(v, tuple) else (v,)
    m = as_tuple(read_struct(fh, f"{d}I", "TT input factors"))
    n = as_tuple(read_struct(fh, f"{d}I", "TT output factors"))
    ranks = read_struct(fh, f"{d + 1}I", "TT ranks")
    s = TTShape(m, n, ranks)
    try:
        validate_shape(s)
    except ShapeError as e:
        raise FormatError(f"Invalid TT layer segment: {e}")
    has_bias = read_struct(fh, "B", "TT bias flag")
    cores = [read_array(fh, s.core_shape(k), what=f"TT core {k}") for k in range(d)]
    bias = read_array(fh, (s.N,), what="TT bias") if has_bias else None
    return TTLayer(TTCores(s, [as_dense(c, name="TT core") for c in cores]), bias)
