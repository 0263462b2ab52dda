import numpy as np

from ttrnn.errors import ArgumentError, ShapeError, UndefinedMetricError


def predicted_classes(scores):
    """
    Argmax per row; ties go to the smallest class index.
    """
    return np.argmax(np.asarray(scores), axis=-1)


def accuracy(pred_classes, true_classes):
    pred = np.asarray(pred_classes)
    true = np.asarray(true_classes)
    if pred.shape != true.shape:
        raise ShapeError(f"{pred.shape[0]} predictions for {true.shape[0]} labels")
    if pred.size == 0:
        raise ArgumentError("Accuracy of an empty set is undefined")
    return float(np.mean(pred == true))


def per_class_accuracy(pred_classes, true_classes, n_classes):
    pred = np.asarray(pred_classes)
    true = np.asarray(true_classes)
    out = np.full(n_classes, np.nan)
    for j in range(n_classes):
        members = true == j
        if members.any():
            out[j] = np.mean(pred[members] == j)
    return out


def average_precision(scores, labels):
    """
    Mean of the precision at each positive hit, ranking by descending score
    with ties broken by the smaller sample index. NaN without positives.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels) != 0
    if not labels.any():
        return float("nan")
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    precision = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float(np.mean(precision[hits]))


def per_class_average_precision(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape != labels.shape:
        raise ShapeError(f"Scores {scores.shape} and labels {labels.shape} must be equal (S, J) matrices")
    if scores.shape[0] < 1:
        raise ArgumentError("Average precision needs at least one sample")
    return np.array([average_precision(scores[:, j], labels[:, j]) for j in range(scores.shape[1])])


def mean_average_precision(scores, labels):
    """
    Mean of the per-class average precision over the classes that have at
    least one positive sample.
    """
    ap = per_class_average_precision(scores, labels)
    defined = ~np.isnan(ap)
    if not defined.any():
        raise UndefinedMetricError("MAP is undefined: no class has a positive label")
    return float(np.mean(ap[defined]))
