"""
Mini-batch training of a SequenceClassifier with Adam, dropout and ridge
regularization of the classifier weights.
"""
import logging
import os
from dataclasses import dataclass, fields
from datetime import datetime

import numpy as np
import pandas as pd
from tqdm import tqdm

from ttrnn.cells import DropoutSpec, pad_sequences
from ttrnn.checkpoint import save_checkpoint
from ttrnn.data import flatten_frames
from ttrnn.errors import ConfigError, DivergedError, NumericsError
from ttrnn.metrics import accuracy, mean_average_precision, predicted_classes
from ttrnn.model import targets
from ttrnn.optim import adam_update, init_train_state

logger = logging.getLogger(__name__)

CHECKPOINT = "model.ttrn"
METRICS_LOG = "metrics.tsv"


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dropout: float = 0.25
    ridge: float = 0.01
    batch_size: int = 16
    epochs: int = 30
    seed: int = 0
    val_fraction: float = 0.2

    def validate(self):
        for name in ("beta1", "beta2", "dropout"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {getattr(self, name)}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")
        if self.learning_rate <= 0 or self.eps <= 0:
            raise ConfigError("learning_rate and eps must be positive")
        if self.ridge < 0:
            raise ConfigError(f"ridge must be >= 0, got {self.ridge}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if self.seed < 0:
            raise ConfigError(f"seed must be a non-negative 64-bit integer, got {self.seed}")
        return self

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    metric_name: str
    metric_value: float


def metric_name(label_mode):
    return "accuracy" if label_mode == "single" else "map"


def split_indices(n, val_fraction, rng):
    """
    Seeded shuffle, then the first round(n * val_fraction) samples (at least
    one) become the validation set.
    """
    order = rng.permutation(n)
    n_val = min(max(1, int(round(n * val_fraction))), n - 1)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def evaluate(model, dataset, sequences=None):
    """
    Accuracy (single-label) or MAP (multi-label) of `model` on `dataset`.
    Returns (metric name, value, scores).
    """
    if sequences is None:
        sequences = [flatten_frames(rec) for rec in dataset.records]
    scores = model.predict_scores(sequences)
    labels = dataset.labels()
    if dataset.label_mode == "single":
        value = accuracy(predicted_classes(scores), labels)
    else:
        value = mean_average_precision(scores, labels)
    return metric_name(dataset.label_mode), value, scores


def _log_header(model, timestamps):
    cell = model.cell
    header = f"# cell={cell.name}\tparams={model.param_count()}\tinput_params={cell.input_param_count()}"
    if timestamps:
        header += f"\tstarted={datetime.now().isoformat(timespec='seconds')}"
    return header + "\n"


def _append_log(path, record, timestamps):
    row = {
        "epoch": [record.epoch],
        "train_loss": [f"{record.train_loss:.10f}"],
        "metric": [record.metric_name],
        "value": [f"{record.metric_value:.10f}"],
    }
    if timestamps:
        row["time"] = [datetime.now().isoformat(timespec="seconds")]
    pd.DataFrame(row).to_csv(path, sep="\t", mode="a", header=False, index=False, lineterminator="\n")


def read_metrics_log(path):
    return pd.read_csv(path, sep="\t", comment="#", header=None,
                       names=["epoch", "train_loss", "metric", "value"], usecols=range(4))


def fit(model, dataset, cfg, val_dataset=None, out_dir=None, progress=True, timestamps=False,
        callback=None):
    """
    Trains `model` on `dataset` and returns (final TrainState, list of
    EpochRecord). Without `val_dataset`, a seeded 80/20 split is used.
    `callback(record, state)` runs after every epoch.

    With `out_dir`, the metrics log is written there and the checkpoint is
    rewritten whenever the validation metric improves. A non-finite loss
    or gradient aborts with DivergedError; the last good checkpoint stays.
    """
    cfg.validate()
    if len(dataset) == 0:
        raise ConfigError("Cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    if val_dataset is None:
        if len(dataset) < 2:
            raise ConfigError("Need at least two records for a train/validation split")
        train_idx, val_idx = split_indices(len(dataset), cfg.val_fraction, rng)
        train_set, val_set = dataset.subset(train_idx), dataset.subset(val_idx)
    else:
        train_set, val_set = dataset, val_dataset

    mode = model.mode
    train_seqs = [flatten_frames(rec) for rec in train_set.records]
    val_seqs = [flatten_frames(rec) for rec in val_set.records]
    train_targets = targets(train_set.labels(), model.clf.n_classes, mode)
    dropout = DropoutSpec(cfg.dropout, training=True)

    ckpt_path = log_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        ckpt_path = os.path.join(out_dir, CHECKPOINT)
        log_path = os.path.join(out_dir, METRICS_LOG)
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write(_log_header(model, timestamps))

    state = init_train_state(model, rng)
    log = []
    best = -np.inf
    saved = None
    for epoch in tqdm(range(1, cfg.epochs + 1), disable=not progress, desc="epochs"):
        order = state.rng.permutation(len(train_seqs))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            frames, lengths = pad_sequences([train_seqs[i] for i in batch])
            value, grads = state.model.loss_and_grads(
                frames, lengths, train_targets[batch], cfg.ridge, dropout, state.rng)
            if not np.isfinite(value):
                raise DivergedError(f"Loss became {value} in epoch {epoch}", saved)
            try:
                state = adam_update(state, grads, cfg)
            except NumericsError as e:
                raise DivergedError(f"{e} in epoch {epoch}", saved)
            total += value * len(batch)

        name, metric, _ = evaluate(state.model, val_set, val_seqs)
        record = EpochRecord(epoch, total / len(train_seqs), name, metric)
        log.append(record)
        logger.info("epoch %d loss %.6f %s %.4f", epoch, record.train_loss, name, metric)
        if log_path is not None:
            _append_log(log_path, record, timestamps)
        if metric > best:
            best = metric
            if ckpt_path is not None:
                save_checkpoint(ckpt_path, state)
                saved = ckpt_path
        if callback is not None:
            callback(record, state)
    return state, log
