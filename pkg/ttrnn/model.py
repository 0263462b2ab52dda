"""
Sequence classifier: a recurrent cell whose last hidden state feeds a
softmax (single-label) or per-class logistic (multi-label) head.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ttrnn.cells import (
    NO_DROPOUT,
    cell_params,
    pad_sequences,
    run_batch,
    run_batch_backward,
    with_params,
)
from ttrnn.cells.core import sigmoid
from ttrnn.errors import ArgumentError, NumericsError, ShapeError

Modes = ["softmax", "logistic"]
PROB_FLOOR = 1e-12


@dataclass
class Classifier:
    weight: np.ndarray
    bias: np.ndarray
    mode: str = "softmax"

    def __post_init__(self):
        if self.mode not in Modes:
            raise ArgumentError(f"Classifier mode must be one of {Modes}, got {self.mode}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(
                f"Classifier weight {self.weight.shape} and bias {self.bias.shape} disagree")
        if self.mode == "softmax" and self.n_classes < 2:
            raise ArgumentError("A softmax classifier needs at least 2 classes")

    @property
    def n_classes(self):
        return self.weight.shape[1]

    @property
    def hidden_size(self):
        return self.weight.shape[0]


def init_classifier(hidden_size, n_classes, mode="softmax", seed=0):
    rng = np.random.default_rng([int(seed), 2])
    std = np.sqrt(2.0 / (hidden_size + n_classes))
    return Classifier(rng.normal(0.0, std, size=(hidden_size, n_classes)), np.zeros(n_classes), mode)


def _activate(logits, mode):
    if mode == "softmax":
        shifted = logits - logits.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)
    return sigmoid(logits)


def classify(clf, h):
    """
    Class probabilities for one hidden vector (N,) or a batch (B, N).
    """
    h = np.asarray(h, dtype=np.float64)
    if not np.all(np.isfinite(h)):
        raise NumericsError("Hidden state contains NaN or Inf values")
    if h.shape[-1] != clf.hidden_size:
        raise ShapeError(f"Hidden state of size {h.shape[-1]}, classifier expects {clf.hidden_size}")
    return _activate(h @ clf.weight + clf.bias, clf.mode)


def loss(probs, labels, mode, clf=None, ridge=0.0):
    """
    Cross-entropy of `probs` against one-hot (softmax) or multi-hot
    (logistic) `labels`, averaged over a batch, plus ridge * ||W||_F^2 of the
    classifier weight. Probabilities are clamped at 1e-12 before the log.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    labels = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    if probs.shape != labels.shape:
        raise ShapeError(f"Probabilities {probs.shape} and labels {labels.shape} disagree")
    if mode == "softmax":
        per_sample = -(labels * np.log(np.maximum(probs, PROB_FLOOR))).sum(axis=1)
    elif mode == "logistic":
        per_sample = -(
            labels * np.log(np.maximum(probs, PROB_FLOOR))
            + (1.0 - labels) * np.log(np.maximum(1.0 - probs, PROB_FLOOR))
        ).sum(axis=1)
    else:
        raise ArgumentError(f"Unknown classifier mode {mode}")
    value = float(per_sample.mean())
    if clf is not None and ridge:
        value += ridge * float(np.sum(clf.weight * clf.weight))
    return value


def targets(labels, n_classes, mode):
    """
    Turns class ids (softmax) or multi-hot rows (logistic) into a float
    target matrix.
    """
    if mode == "softmax":
        ids = np.asarray(labels, dtype=np.int64)
        if np.any(ids < 0) or np.any(ids >= n_classes):
            raise ArgumentError(f"Class ids must lie in [0, {n_classes})")
        out = np.zeros((len(ids), n_classes))
        out[np.arange(len(ids)), ids] = 1.0
        return out
    out = np.asarray(labels, dtype=np.float64).reshape(-1, n_classes)
    return out


@dataclass
class SequenceClassifier:
    cell: object
    clf: Classifier

    def __post_init__(self):
        if self.cell.hidden_size != self.clf.hidden_size:
            raise ShapeError(
                f"Cell hidden size {self.cell.hidden_size} does not match "
                f"classifier input {self.clf.hidden_size}")

    @property
    def mode(self):
        return self.clf.mode

    def params(self):
        out = {f"cell.{name}": p for name, p in cell_params(self.cell).items()}
        out["clf.weight"] = self.clf.weight
        out["clf.bias"] = self.clf.bias
        return out

    def with_params(self, params):
        cell = with_params(self.cell, {
            name[len("cell."):]: p for name, p in params.items() if name.startswith("cell.")
        })
        clf = replace(self.clf, weight=params["clf.weight"], bias=params["clf.bias"])
        return SequenceClassifier(cell, clf)

    def param_count(self):
        return sum(p.size for p in self.params().values())

    def loss_and_grads(self, frames, lengths, target, ridge=0.0, dropout=NO_DROPOUT, rng=None):
        """
        Batch loss and gradients of every parameter, keyed like params().
        `target` is the (B, J) one-hot / multi-hot matrix.
        """
        h, cache = run_batch(self.cell, frames, lengths, dropout, rng, return_cache=True)
        probs = classify(self.clf, h)
        value = loss(probs, target, self.mode, self.clf, ridge)

        # softmax + cross-entropy and sigmoid + binary cross-entropy share this form
        d_logits = (probs - target) / len(h)
        grads = {f"cell.{name}": g for name, g in run_batch_backward(
            self.cell, cache, d_logits @ self.clf.weight.T).items()}
        grads["clf.weight"] = h.T @ d_logits + 2.0 * ridge * self.clf.weight
        grads["clf.bias"] = d_logits.sum(axis=0)
        return value, grads

    def predict_scores(self, sequences, batch_size=32, threads=None):
        """
        Class probabilities for a list of (T_i, M) sequences, in order.
        With more than one thread, batches are spread over a thread pool.
        """
        if threads is None:
            threads = int(os.environ.get("TTRNN_THREADS", "1") or 1)
        chunks = [sequences[i:i + batch_size] for i in range(0, len(sequences), batch_size)]

        def score(chunk):
            frames, lengths = pad_sequences(chunk)
            return classify(self.clf, run_batch(self.cell, frames, lengths))

        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(score, chunks))
        else:
            results = [score(chunk) for chunk in chunks]
        if not results:
            return np.zeros((0, self.clf.n_classes))
        return np.concatenate(results, axis=0)
