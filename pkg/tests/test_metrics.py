import numpy as np
import pytest

from ttrnn.errors import ArgumentError, UndefinedMetricError
from ttrnn.metrics import (
    accuracy,
    average_precision,
    mean_average_precision,
    per_class_accuracy,
    per_class_average_precision,
    predicted_classes,
)


def brute_force_ap(scores, labels):
    # rank by (-score, index), then average precision over the positive hits
    ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits, total, found = 0, 0.0, 0
    for rank, i in enumerate(ranked, start=1):
        if labels[i]:
            hits += 1
            total += hits / rank
            found += 1
    return total / found


@pytest.mark.parametrize("pred, true, expected", [
    ([0, 1, 2], [0, 1, 2], 1.0),
    ([1, 2, 0], [0, 1, 2], 0.0),
    ([0, 1, 1, 3, 2], [0, 1, 2, 3, 0], 0.6),
])
def test_accuracy(pred, true, expected):
    assert accuracy(pred, true) == pytest.approx(expected)


def test_accuracy_empty():
    with pytest.raises(ArgumentError):
        accuracy([], [])


def test_argmax_ties_go_to_smallest_index():
    np.testing.assert_array_equal(predicted_classes([[0.2, 0.4, 0.4], [0.5, 0.5, 0.0]]), [1, 0])


def test_per_class_accuracy():
    out = per_class_accuracy([0, 1, 1, 0], [0, 1, 0, 0], 3)
    np.testing.assert_allclose(out[:2], [2 / 3, 1.0])
    assert np.isnan(out[2])


class TestAveragePrecision:
    def test_two_hits(self):
        ap = average_precision([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
        assert ap == pytest.approx(0.5 * (1 + 2 / 3), rel=1e-12)

    def test_last_ranked_positive(self):
        assert average_precision([0.9, 0.8, 0.7, 0.6], [0, 0, 0, 1]) == pytest.approx(0.25)

    def test_perfect_ranking(self, rng):
        labels = rng.integers(0, 2, size=(30, 5))
        labels[0] = 1
        scores = labels + rng.uniform(0, 0.5, size=labels.shape)
        assert mean_average_precision(scores, labels) == 1.0

    def test_ties_break_towards_smaller_index(self):
        assert average_precision([0.5, 0.5], [0, 1]) == pytest.approx(0.5)
        assert average_precision([0.5, 0.5], [1, 0]) == 1.0

    def test_classes_without_positives_are_skipped(self):
        scores = np.array([[0.9, 0.1], [0.2, 0.8]])
        labels = np.array([[1, 0], [0, 0]])
        ap = per_class_average_precision(scores, labels)
        assert ap[0] == 1.0 and np.isnan(ap[1])
        assert mean_average_precision(scores, labels) == 1.0

    def test_no_positives_at_all(self):
        with pytest.raises(UndefinedMetricError):
            mean_average_precision(np.ones((3, 2)), np.zeros((3, 2)))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            S, J = int(rng.integers(1, 15)), int(rng.integers(1, 5))
            # integer scores force ties
            scores = rng.integers(0, 4, size=(S, J)).astype(np.float64)
            labels = rng.integers(0, 2, size=(S, J))
            defined = [j for j in range(J) if labels[:, j].any()]
            if not defined:
                with pytest.raises(UndefinedMetricError):
                    mean_average_precision(scores, labels)
                continue
            expected = np.mean([brute_force_ap(list(scores[:, j]), list(labels[:, j])) for j in defined])
            assert mean_average_precision(scores, labels) == pytest.approx(expected, rel=1e-12)

    def test_monotone_transform_invariance(self, rng):
        scores = rng.normal(size=(40, 4))
        labels = rng.integers(0, 2, size=(40, 4))
        labels[0] = 1
        base = mean_average_precision(scores, labels)
        assert mean_average_precision(np.exp(3 * scores) + 1, labels) == pytest.approx(base, rel=1e-12)
        assert mean_average_precision(np.arctan(scores), labels) == pytest.approx(base, rel=1e-12)
