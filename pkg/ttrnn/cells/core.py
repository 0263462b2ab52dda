"""
Recurrent cells with a plain or TT-factorized input-to-hidden map.

Every cell kind lives in its own module of this package (srnn, gru, lstm,
mlp) and is loaded by name, the same way each variant brings its own step
and backward functions. The fused input map produces all gate
pre-activations at once; `gate_slices` cuts them apart in the kind's fixed
gate order.
"""
import importlib
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Union

import numpy as np

from ttrnn.binio import read_array, read_struct, write_array, write_struct
from ttrnn.errors import ArgumentError, FormatError, ShapeError
from ttrnn.tt_layer import (
    TTCores,
    TTLayer,
    TTShape,
    init_cores,
    read_layer,
    reconstruct_matrix,
    tt_backward,
    tt_forward,
    validate_shape,
    write_layer,
)

CellKinds = ["srnn", "gru", "lstm", "mlp"]
KIND_TAGS = {kind: tag for tag, kind in enumerate(CellKinds)}


def parse_kind(name):
    """
    "tt-gru" -> ("gru", True), "lstm" -> ("lstm", False)
    """
    name = name.lower().replace("_", "-")
    tt = name.startswith("tt-")
    kind = name[3:] if tt else name
    if kind not in CellKinds:
        raise ArgumentError(
            f"Cell kind '{name}' unknown. Available kinds: "
            + ", ".join(CellKinds + [f"tt-{k}" for k in CellKinds]))
    return kind, tt


def kind_module(kind):
    return importlib.import_module(f"ttrnn.cells.{kind}")


@dataclass
class DenseInputMap:
    weight: np.ndarray

    @property
    def input_size(self):
        return self.weight.shape[0]

    @property
    def output_size(self):
        return self.weight.shape[1]

    def forward(self, x):
        return x @ self.weight, None

    def backward(self, x, grad_out, cache, grads):
        grads["input.weight"] += x.T @ grad_out


@dataclass
class TTInputMap:
    layer: TTLayer

    @property
    def input_size(self):
        return self.layer.shape.M

    @property
    def output_size(self):
        return self.layer.shape.N

    def forward(self, x):
        return tt_forward(self.layer, x, return_inputs=True)

    def backward(self, x, grad_out, cache, grads):
        grad_cores, _, _ = tt_backward(self.layer, x, grad_out, inputs=cache)
        for k, g in enumerate(grad_cores.cores):
            grads[f"input.core{k}"] += g


InputMap = Union[DenseInputMap, TTInputMap]


@dataclass
class RNNCell:
    kind: str
    input_map: InputMap
    U: Dict[str, np.ndarray]
    b: Dict[str, np.ndarray]
    hidden_size: int
    n_frames: int = 1

    def __post_init__(self):
        module = kind_module(self.kind)
        N = self.hidden_size
        if self.input_map.output_size != len(module.GATES) * N:
            raise ShapeError(
                f"{self.kind} input map yields {self.input_map.output_size} values, "
                f"expected {len(module.GATES)} x {N}")
        if tuple(self.U) != module.RECURRENT or tuple(self.b) != module.BIASES:
            raise ShapeError(
                f"{self.kind} expects recurrent weights {module.RECURRENT} "
                f"and biases {module.BIASES}, got {tuple(self.U)} and {tuple(self.b)}")
        for name, u in self.U.items():
            if u.shape != (N, N):
                raise ShapeError(f"U.{name} has shape {u.shape}, expected {(N, N)}")
        for name, bias in self.b.items():
            if bias.shape != (N,):
                raise ShapeError(f"b.{name} has shape {bias.shape}, expected {(N,)}")
        if self.input_map.input_size % self.n_frames:
            raise ShapeError(
                f"Input size {self.input_map.input_size} is not a multiple of {self.n_frames} frames")

    @property
    def module(self):
        return kind_module(self.kind)

    @property
    def gates(self):
        return self.module.GATES

    @property
    def c(self):
        return len(self.gates)

    @property
    def is_tt(self):
        return isinstance(self.input_map, TTInputMap)

    @property
    def name(self):
        return ("tt-" if self.is_tt else "") + self.kind

    @property
    def input_size(self):
        """
        Size of one frame vector x^[t].
        """
        return self.input_map.input_size // self.n_frames

    def input_param_count(self):
        if self.is_tt:
            return self.input_map.layer.cores.size
        return self.input_map.weight.size

    def param_count(self):
        return sum(p.size for p in cell_params(self).values())


@dataclass
class HiddenState:
    h: np.ndarray
    c: Optional[np.ndarray] = field(default=None)


@dataclass
class DropoutSpec:
    """
    Dropout on the inputs x^[t] and on h^[t-1] before the recurrent
    products, with a fresh mask per timestep. Inactive unless `training`.
    """

    rate: float = 0.0
    training: bool = False

    @property
    def active(self):
        return self.training and self.rate > 0.0

    def mask(self, rng, shape):
        if not self.active:
            return None
        keep = 1.0 - self.rate
        return (rng.random(shape) < keep) / keep


NO_DROPOUT = DropoutSpec()


def fuse_gate_shape(s, c):
    """
    Scales the first output factor n_1 by the number of gates c, so one TT
    layer yields all gate pre-activations.
    """
    validate_shape(s)
    return TTShape(s.m, (s.n[0] * int(c),) + tuple(s.n[1:]), s.ranks)


def gate_slices(fused_output, c, N):
    """
    Cuts the last axis of a fused pre-activation of length c * N into c
    contiguous blocks of length N.
    """
    fused_output = np.asarray(fused_output)
    if fused_output.shape[-1] != c * N:
        raise ShapeError(f"Fused output has length {fused_output.shape[-1]}, expected {c} x {N}")
    return [fused_output[..., g * N:(g + 1) * N] for g in range(c)]


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def init_cell(kind, input_size, hidden_size, tt_shape=None, seed=0, n_frames=1):
    """
    Builds a cell with freshly initialized parameters.

    `kind` is one of srnn, gru, lstm, mlp, optionally prefixed by "tt-".
    For TT kinds, `tt_shape` factorizes the (un-fused) input-to-hidden map;
    the gate multiplier is applied here. Biases start at zero, recurrent
    weights are orthogonal and a dense input map is Glorot-normal.
    """
    kind, tt = parse_kind(kind)
    module = kind_module(kind)
    c = len(module.GATES)
    if kind != "mlp":
        n_frames = 1
    M = int(input_size) * int(n_frames)
    N = int(hidden_size)
    rng = np.random.default_rng([int(seed), 1])
    if tt:
        if tt_shape is None:
            raise ArgumentError(f"tt-{kind} needs a TT shape")
        validate_shape(tt_shape)
        if tt_shape.M != M or tt_shape.N != N:
            raise ShapeError(
                f"TT shape {tt_shape} maps {tt_shape.M} -> {tt_shape.N}, "
                f"but the cell maps {M} -> {N}")
        input_map = TTInputMap(TTLayer(init_cores(fuse_gate_shape(tt_shape, c), seed)))
    else:
        std = np.sqrt(2.0 / (M + c * N))
        input_map = DenseInputMap(rng.normal(0.0, std, size=(M, c * N)))
    U = {name: _orthogonal(rng, N) for name in module.RECURRENT}
    b = {name: np.zeros(N) for name in module.BIASES}
    return RNNCell(kind, input_map, U, b, N, n_frames)


def to_dense(cell):
    """
    Same cell with its TT input map replaced by the reconstructed matrix.
    """
    if not cell.is_tt:
        return cell
    weight = reconstruct_matrix(cell.input_map.layer.cores)
    return replace(cell, input_map=DenseInputMap(weight))


def cell_params(cell):
    params = {}
    if cell.is_tt:
        for k, core in enumerate(cell.input_map.layer.cores.cores):
            params[f"input.core{k}"] = core
    else:
        params["input.weight"] = cell.input_map.weight
    for name, u in cell.U.items():
        params[f"U.{name}"] = u
    for name, bias in cell.b.items():
        params[f"b.{name}"] = bias
    return params


def with_params(cell, params):
    if cell.is_tt:
        layer = cell.input_map.layer
        cores = [params[f"input.core{k}"] for k in range(layer.shape.d)]
        input_map = TTInputMap(TTLayer(TTCores(layer.shape, cores), layer.bias))
    else:
        input_map = DenseInputMap(params["input.weight"])
    return replace(
        cell,
        input_map=input_map,
        U={name: params[f"U.{name}"] for name in cell.U},
        b={name: params[f"b.{name}"] for name in cell.b},
    )


def zero_grads(cell):
    return {name: np.zeros_like(p) for name, p in cell_params(cell).items()}


def _check_frames(cell, frames, lengths):
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 3 or frames.shape[2] != cell.input_size:
        raise ShapeError(
            f"Frames of shape {frames.shape} do not match cell input size {cell.input_size}")
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.shape != (frames.shape[0],):
        raise ShapeError(f"Got {lengths.shape} lengths for {frames.shape[0]} sequences")
    if np.any(lengths < 1) or np.any(lengths > frames.shape[1]):
        raise ArgumentError(f"Sequence lengths must lie in [1, {frames.shape[1]}]")
    return frames, lengths


def run_batch(cell, frames, lengths, dropout=NO_DROPOUT, rng=None, return_cache=False):
    """
    Runs a right-padded batch of sequences, frames of shape (B, T, M), and
    returns the hidden state after each sequence's last frame, (B, N).
    Steps past a sequence's length copy its state through unchanged.
    """
    frames, lengths = _check_frames(cell, frames, lengths)
    if dropout.active and rng is None:
        raise ArgumentError("Dropout needs a random generator")
    module = cell.module
    if not module.STATEFUL:
        return module.encode(cell, frames, lengths, dropout, rng, return_cache)

    B, T, M = frames.shape
    N = cell.hidden_size
    x_mask = dropout.mask(rng, (B, T, M))
    h_mask = dropout.mask(rng, (B, T, N))
    x = frames if x_mask is None else frames * x_mask
    x = x.reshape(B * T, M)
    fused, map_cache = cell.input_map.forward(x)
    fused = fused.reshape(B, T, -1)

    h = np.zeros((B, N))
    c = np.zeros((B, N)) if module.HAS_MEMORY else None
    steps = []
    for t in range(T):
        active = (t < lengths).astype(np.float64)[:, None]
        mask = None if h_mask is None else h_mask[:, t]
        h_new, c_new, cache = module.step(cell, fused[:, t], h, c, mask)
        h = active * h_new + (1.0 - active) * h
        if c is not None:
            c = active * c_new + (1.0 - active) * c
        steps.append((cache, active))
    if return_cache:
        return h, {"x": x, "map": map_cache, "steps": steps, "shape": (B, T)}
    return h


def run_batch_backward(cell, cache, grad_h, grads=None):
    """
    Backpropagates grad_h, the gradient of the loss w.r.t. run_batch's
    output, through time. Accumulates into and returns the parameter
    gradient dict.
    """
    if grads is None:
        grads = zero_grads(cell)
    module = cell.module
    if not module.STATEFUL:
        return module.encode_backward(cell, cache, grad_h, grads)

    B, T = cache["shape"]
    fused_grad = np.zeros((B, T, cell.input_map.output_size))
    dh = np.asarray(grad_h, dtype=np.float64)
    dc = np.zeros_like(dh) if module.HAS_MEMORY else None
    for t in reversed(range(T)):
        step_cache, active = cache["steps"][t]
        d_fused, dh_prev, dc_prev = module.step_backward(
            cell, step_cache, active * dh, None if dc is None else active * dc, grads)
        fused_grad[:, t] = d_fused
        dh = (1.0 - active) * dh + dh_prev
        if dc is not None:
            dc = (1.0 - active) * dc + dc_prev
    cell.input_map.backward(cache["x"], fused_grad.reshape(B * T, -1), cache["map"], grads)
    return grads


def run_sequence(cell, frames, dropout=NO_DROPOUT, rng=None):
    """
    Runs one sequence of T >= 1 frames from the zero state and returns the
    last hidden state h^[T].
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or len(frames) == 0:
        raise ArgumentError("run_sequence needs a non-empty (T, M) sequence")
    return run_batch(cell, frames[None], [len(frames)], dropout, rng)[0]


def pad_sequences(sequences):
    """
    Right-pads a list of (T_i, M) arrays into (B, max T, M) plus lengths.
    """
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    if len(sequences) == 0 or np.any(lengths < 1):
        raise ArgumentError("Cannot pad an empty batch or an empty sequence")
    width = sequences[0].shape[1]
    out = np.zeros((len(sequences), int(lengths.max()), width))
    for i, s in enumerate(sequences):
        out[i, :len(s)] = s
    return out, lengths


def _single_step(cell, kind, x, h_prev, c_prev=None):
    if cell.kind != kind:
        raise ArgumentError(f"Expected a {kind} cell, got {cell.kind}")
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x.shape != (cell.input_size,) or h_prev.shape != (cell.hidden_size,):
        raise ShapeError(
            f"Step inputs {x.shape}, {h_prev.shape} do not match "
            f"({cell.input_size},), ({cell.hidden_size},)")
    fused, _ = cell.input_map.forward(x[None])
    c = None if c_prev is None else np.asarray(c_prev, dtype=np.float64)[None]
    h, c, _ = cell.module.step(cell, fused, h_prev[None], c, None)
    return h[0], (None if c is None else c[0])


def srnn_step(cell, x, h_prev):
    return _single_step(cell, "srnn", x, h_prev)[0]


def gru_step(cell, x, h_prev):
    return _single_step(cell, "gru", x, h_prev)[0]


def lstm_step(cell, x, state):
    c_prev = state.c if state.c is not None else np.zeros(cell.hidden_size)
    if np.shape(c_prev) != (cell.hidden_size,):
        raise ShapeError(f"Cell memory of shape {np.shape(c_prev)}, expected ({cell.hidden_size},)")
    h, c = _single_step(cell, "lstm", x, state.h, c_prev)
    return HiddenState(h, c)


def write_cell(fh, cell):
    write_struct(fh, "B", KIND_TAGS[cell.kind])
    write_struct(fh, "III", cell.c, cell.hidden_size, cell.input_map.input_size)
    if cell.kind == "mlp":
        write_struct(fh, "I", cell.n_frames)
    write_struct(fh, "B", int(cell.is_tt))
    if cell.is_tt:
        write_layer(fh, cell.input_map.layer)
    else:
        write_struct(fh, "II", *cell.input_map.weight.shape)
        write_array(fh, cell.input_map.weight)
    for u in cell.U.values():
        write_array(fh, u)
    for bias in cell.b.values():
        write_array(fh, bias)


def read_cell(fh):
    tag = read_struct(fh, "B", "cell kind")
    if tag >= len(CellKinds):
        raise FormatError(f"Unknown cell kind tag {tag}")
    kind = CellKinds[tag]
    module = kind_module(kind)
    c, N, M = read_struct(fh, "III", "cell header")
    if c != len(module.GATES):
        raise FormatError(f"{kind} cell with {c} gates")
    n_frames = read_struct(fh, "I", "frame count") if kind == "mlp" else 1
    map_tag = read_struct(fh, "B", "input map tag")
    if map_tag == 1:
        layer = read_layer(fh)
        if layer.shape.M != M or layer.shape.N != c * N:
            raise FormatError(f"TT input map {layer.shape} does not match cell {M} -> {c} x {N}")
        input_map = TTInputMap(layer)
    elif map_tag == 0:
        rows, cols = read_struct(fh, "II", "dense input map header")
        if (rows, cols) != (M, c * N):
            raise FormatError(f"Dense input map {rows}x{cols} does not match cell {M} -> {c} x {N}")
        input_map = DenseInputMap(read_array(fh, (rows, cols), what="dense input map"))
    else:
        raise FormatError(f"Unknown input map tag {map_tag}")
    U = {name: read_array(fh, (N, N), what=f"U.{name}") for name in module.RECURRENT}
    b = {name: read_array(fh, (N,), what=f"b.{name}") for name in module.BIASES}
    try:
        return RNNCell(kind, input_map, U, b, N, n_frames)
    except ShapeError as e:
        raise FormatError(f"Inconsistent cell segment: {e}")
