"""
Run configuration: UTF-8 `key=value` files with `#` comments, overridden by
command-line flags.
"""
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Tuple

from ttrnn.cells import init_cell, parse_kind
from ttrnn.cells.mlp import DEFAULT_FRAMES
from ttrnn.errors import ArgumentError, ConfigError, ShapeError
from ttrnn.model import SequenceClassifier, init_classifier
from ttrnn.train import TrainConfig
from ttrnn.tt_layer import TTShape, parse_factors, validate_shape


@dataclass
class RunConfig:
    cell: str = "tt-gru"
    input_factors: Tuple[int, ...] = ()
    hidden_factors: Tuple[int, ...] = ()
    ranks: Tuple[int, ...] = ()
    data: Optional[str] = None
    val_data: Optional[str] = None
    out: str = "runs/ttrnn"
    mlp_frames: int = DEFAULT_FRAMES
    train: TrainConfig = field(default_factory=TrainConfig)

    @property
    def input_size(self):
        return _prod(self.input_factors)

    @property
    def hidden_size(self):
        return _prod(self.hidden_factors)

    def tt_shape(self):
        return TTShape(self.input_factors, self.hidden_factors, self.ranks)

    def validate(self, frame_size=None):
        """
        Checks the factorization against itself and, when given, against the
        dataset's frame size. Raises ConfigError.
        """
        try:
            kind, tt = parse_kind(self.cell)
        except ArgumentError as e:
            raise ConfigError(str(e))
        if not self.input_factors or not self.hidden_factors:
            raise ConfigError("input_factors and hidden_factors are required")
        if tt:
            try:
                validate_shape(self.tt_shape())
            except ShapeError as e:
                raise ConfigError(f"Invalid factorization: {e}")
        if self.mlp_frames < 1:
            raise ConfigError(f"mlp_frames must be >= 1, got {self.mlp_frames}")
        if frame_size is not None:
            expected = frame_size * (self.mlp_frames if kind == "mlp" else 1)
            if self.input_size != expected:
                raise ConfigError(
                    f"Input factors {'x'.join(map(str, self.input_factors))} = {self.input_size} "
                    f"do not match the model input size {expected} (frame size {frame_size})")
        self.train.validate()
        return self

    def build_model(self, frame_size, n_classes, label_mode):
        kind, tt = parse_kind(self.cell)
        n_frames = self.mlp_frames if kind == "mlp" else 1
        cell = init_cell(
            self.cell, frame_size, self.hidden_size,
            tt_shape=self.tt_shape() if tt else None, seed=self.train.seed, n_frames=n_frames)
        mode = "softmax" if label_mode == "single" else "logistic"
        clf = init_classifier(self.hidden_size, n_classes, mode, seed=self.train.seed)
        return SequenceClassifier(cell, clf)


def _prod(values):
    out = 1
    for v in values:
        out *= v
    return out


FACTOR_KEYS = ("input_factors", "hidden_factors", "ranks")
TRAIN_KEYS = {
    "learning_rate": float, "lr": float, "beta1": float, "beta2": float, "eps": float,
    "dropout": float, "ridge": float, "batch_size": int, "epochs": int, "seed": int,
    "val_fraction": float,
}


def parse_config_lines(lines):
    """
    `key=value` lines -> dict; blank lines and `#` comments are skipped.
    """
    values = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {lineno}: expected key=value, got {line!r}")
        key, val = line.split("=", 1)
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_lines(fh.readlines())
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}")


def apply_values(cfg, values):
    """
    Returns a copy of `cfg` with the given (string or typed) values applied.
    """
    train = {}
    top = {}
    for key, val in values.items():
        if val is None:
            continue
        try:
            if key in FACTOR_KEYS:
                top[key] = parse_factors(val)
            elif key == "mlp_frames":
                top[key] = int(val)
            elif key in ("cell", "data", "val_data", "out"):
                top[key] = str(val)
            elif key in TRAIN_KEYS:
                name = "learning_rate" if key == "lr" else key
                train[name] = TRAIN_KEYS[key](val)
            else:
                raise ConfigError(f"Unknown configuration key '{key}'")
        except (ValueError, ShapeError) as e:
            raise ConfigError(f"Invalid value for {key}: {val!r} ({e})")
    return replace(cfg, train=replace(cfg.train, **train), **top)


def load_run_config(path=None, overrides=None):
    cfg = RunConfig()
    if path:
        cfg = apply_values(cfg, load_config_file(path))
    if overrides:
        cfg = apply_values(cfg, overrides)
    return cfg


def config_keys():
    return [f.name for f in fields(RunConfig) if f.name != "train"] + TrainConfig.field_names()
