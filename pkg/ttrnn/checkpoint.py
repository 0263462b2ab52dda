"""
Binary checkpoints: magic "TTRN", u16 format version, then the cell
segment, the classifier segment and the optimizer-state segment (Adam
moments, step counter, generator state). Everything little-endian.
"""
import os

import numpy as np

from ttrnn.binio import (
    read_array,
    read_string,
    read_struct,
    write_array,
    write_string,
    write_struct,
)
from ttrnn.cells import read_cell, write_cell
from ttrnn.errors import FormatError, ShapeError
from ttrnn.model import Classifier, Modes, SequenceClassifier
from ttrnn.optim import TrainState

MAGIC = b"TTRN"
VERSION = 1


def write_classifier(fh, clf):
    write_struct(fh, "B", Modes.index(clf.mode))
    write_struct(fh, "II", clf.hidden_size, clf.n_classes)
    write_array(fh, clf.weight)
    write_array(fh, clf.bias)


def read_classifier(fh):
    mode = read_struct(fh, "B", "classifier mode")
    if mode >= len(Modes):
        raise FormatError(f"Unknown classifier mode tag {mode}")
    N, J = read_struct(fh, "II", "classifier header")
    weight = read_array(fh, (N, J), what="classifier weight")
    bias = read_array(fh, (J,), what="classifier bias")
    return Classifier(weight, bias, Modes[mode])


def _write_u128(fh, value):
    fh.write(int(value).to_bytes(16, "little"))


def _read_u128(fh):
    raw = fh.read(16)
    if len(raw) != 16:
        raise FormatError("Truncated generator state")
    return int.from_bytes(raw, "little")


def write_generator(fh, rng):
    state = rng.bit_generator.state
    if state["bit_generator"] != "PCG64":
        raise FormatError(f"Cannot store a {state['bit_generator']} generator")
    _write_u128(fh, state["state"]["state"])
    _write_u128(fh, state["state"]["inc"])
    write_struct(fh, "BI", state["has_uint32"], state["uinteger"])


def read_generator(fh):
    value = _read_u128(fh)
    inc = _read_u128(fh)
    has_uint32, uinteger = read_struct(fh, "BI", "generator state")
    bit_generator = np.random.PCG64()
    bit_generator.state = {
        "bit_generator": "PCG64",
        "state": {"state": value, "inc": inc},
        "has_uint32": has_uint32,
        "uinteger": uinteger,
    }
    return np.random.Generator(bit_generator)


def write_optimizer(fh, state):
    write_struct(fh, "QI", state.step, len(state.m))
    for name in state.m:
        write_string(fh, name)
        write_struct(fh, "I", state.m[name].size)
        write_array(fh, state.m[name])
        write_array(fh, state.v[name])
    write_generator(fh, state.rng)


def read_optimizer(fh, model):
    step, count = read_struct(fh, "QI", "optimizer header")
    params = model.params()
    m, v = {}, {}
    for _ in range(count):
        name = read_string(fh, "parameter name")
        size = read_struct(fh, "I", "moment size")
        if name not in params or params[name].size != size:
            raise FormatError(f"Optimizer state for unknown parameter {name}")
        shape = params[name].shape
        m[name] = read_array(fh, shape, what=f"first moment of {name}")
        v[name] = read_array(fh, shape, what=f"second moment of {name}")
    if set(m) != set(params):
        raise FormatError("Optimizer state does not cover every parameter")
    return step, m, v, read_generator(fh)


def save_checkpoint(path, state):
    """
    Writes `state` to `path` through a temporary file, so an existing
    checkpoint is only replaced by a complete one.
    """
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        write_struct(fh, "H", VERSION)
        write_cell(fh, state.model.cell)
        write_classifier(fh, state.model.clf)
        write_optimizer(fh, state)
    os.replace(tmp, path)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise FormatError(f"{path} is not a ttrnn checkpoint (bad magic)")
        version = read_struct(fh, "H", "format version")
        if version != VERSION:
            raise FormatError(f"{path} has unsupported checkpoint version {version}")
        cell = read_cell(fh)
        clf = read_classifier(fh)
        try:
            model = SequenceClassifier(cell, clf)
        except ShapeError as e:
            raise FormatError(f"{path}: {e}")
        step, m, v, rng = read_optimizer(fh, model)
        if fh.read(1):
            raise FormatError(f"{path} has trailing bytes")
    return TrainState(model, m, v, step, rng)
