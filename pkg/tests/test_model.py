import numpy as np
import pytest

from conftest import numeric_grad, rel_error
from ttrnn.cells import DropoutSpec, init_cell, pad_sequences
from ttrnn.errors import ArgumentError, NumericsError, ShapeError
from ttrnn.metrics import predicted_classes
from ttrnn.model import Classifier, SequenceClassifier, classify, init_classifier, loss, targets
from ttrnn.tt_layer import TTShape

SHAPE = TTShape((2, 3, 4), (2, 2, 2), (1, 2, 2, 1))


def make_model(kind="tt-gru", mode="softmax", n_classes=3, seed=0):
    cell = init_cell(kind, SHAPE.M, SHAPE.N, tt_shape=SHAPE, seed=seed)
    clf = init_classifier(SHAPE.N, n_classes, mode, seed=seed)
    return SequenceClassifier(cell, clf)


def make_batch(rng, lengths=(4, 3), n_classes=3, mode="softmax"):
    frames, lengths = pad_sequences([rng.uniform(0, 1, size=(t, SHAPE.M)) for t in lengths])
    if mode == "softmax":
        labels = rng.integers(0, n_classes, size=len(lengths))
    else:
        labels = rng.integers(0, 2, size=(len(lengths), n_classes))
    return frames, lengths, targets(labels, n_classes, mode)


class TestClassify:
    def test_zero_softmax_is_uniform(self):
        clf = Classifier(np.zeros((8, 11)), np.zeros(11), "softmax")
        np.testing.assert_allclose(classify(clf, np.ones(8)), np.full(11, 1 / 11), rtol=1e-15)

    def test_zero_logistic_is_half(self):
        clf = Classifier(np.zeros((8, 12)), np.zeros(12), "logistic")
        np.testing.assert_array_equal(classify(clf, np.ones(8)), np.full(12, 0.5))

    def test_softmax_sums_to_one(self, rng):
        clf = Classifier(rng.normal(scale=50, size=(8, 5)), rng.normal(size=5))
        probs = classify(clf, rng.normal(scale=10, size=(20, 8)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_constant_logit_shift(self, rng):
        clf = Classifier(rng.normal(size=(8, 5)), rng.normal(size=5))
        shifted = Classifier(clf.weight, clf.bias + 7.5)
        h = rng.normal(size=(10, 8))
        np.testing.assert_allclose(classify(clf, h), classify(shifted, h), atol=1e-12)
        np.testing.assert_array_equal(predicted_classes(classify(clf, h)), predicted_classes(classify(shifted, h)))

    def test_non_finite_hidden_state(self):
        clf = Classifier(np.zeros((2, 3)), np.zeros(3))
        with pytest.raises(NumericsError):
            classify(clf, np.array([1.0, np.inf]))

    def test_bad_construction(self):
        with pytest.raises(ShapeError):
            Classifier(np.zeros((2, 3)), np.zeros(2))
        with pytest.raises(ArgumentError):
            Classifier(np.zeros((2, 3)), np.zeros(3), "relu")


class TestLoss:
    def test_uniform_two_classes(self):
        assert loss([0.5, 0.5], [1.0, 0.0], "softmax") == pytest.approx(np.log(2), rel=1e-12)

    def test_perfect_prediction(self):
        assert 0.0 <= loss([1.0, 0.0], [1.0, 0.0], "softmax") <= 1e-12
        assert 0.0 <= loss([1.0, 0.0], [1.0, 0.0], "logistic") <= 1e-11

    def test_zero_probability_is_clamped(self):
        assert loss([0.0, 1.0], [1.0, 0.0], "softmax") == pytest.approx(-np.log(1e-12))

    def test_ridge_addend(self):
        clf = Classifier(np.ones((4, 3)), np.zeros(3))
        probs, labels = [0.2, 0.3, 0.5], [0.0, 0.0, 1.0]
        base = loss(probs, labels, "softmax")
        assert loss(probs, labels, "softmax", clf, 0.01) - base == pytest.approx(0.12, rel=1e-12)

    def test_batch_mean(self):
        probs = np.array([[0.5, 0.5], [0.25, 0.75]])
        labels = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert loss(probs, labels, "softmax") == pytest.approx((np.log(2) - np.log(0.75)) / 2)

    def test_targets(self):
        np.testing.assert_array_equal(targets([2, 0], 3, "softmax"), [[0, 0, 1], [1, 0, 0]])
        with pytest.raises(ArgumentError):
            targets([3], 3, "softmax")


class TestSequenceClassifier:
    def test_param_keys(self):
        model = make_model()
        keys = set(model.params())
        assert {"cell.input.core0", "cell.U.r", "cell.b.z", "clf.weight", "clf.bias"} <= keys
        assert "cell.b.d" not in keys
        assert model.param_count() == sum(p.size for p in model.params().values())

    def test_hidden_size_mismatch(self):
        cell = init_cell("tt-gru", SHAPE.M, SHAPE.N, tt_shape=SHAPE)
        with pytest.raises(ShapeError):
            SequenceClassifier(cell, init_classifier(SHAPE.N + 1, 3))

    @pytest.mark.parametrize("kind", ["tt-gru", "tt-lstm"])
    @pytest.mark.parametrize("mode", ["softmax", "logistic"])
    def test_end_to_end_gradients(self, kind, mode):
        rng = np.random.default_rng(31)
        model = make_model(kind, mode, seed=4)
        frames, lengths, target = make_batch(rng, mode=mode)
        spec = DropoutSpec(0.25, training=True)

        def objective():
            value, _ = model.loss_and_grads(frames, lengths, target, 0.01, spec, np.random.default_rng(6))
            return value

        _, grads = model.loss_and_grads(frames, lengths, target, 0.01, spec, np.random.default_rng(6))
        for name, p in model.params().items():
            assert rel_error(grads[name], numeric_grad(objective, p)) < 1e-3, name

    def test_small_gradient_step_lowers_loss(self):
        rng = np.random.default_rng(8)
        frames, lengths, target = make_batch(rng, lengths=(4, 2, 5, 3))
        for seed in range(5):
            model = make_model(seed=seed)
            before, grads = model.loss_and_grads(frames, lengths, target, 0.01)
            stepped = model.with_params({
                name: p - 1e-4 * grads[name] for name, p in model.params().items()
            })
            after, _ = stepped.loss_and_grads(frames, lengths, target, 0.01)
            assert after <= before

    def test_threaded_scores_match(self, rng):
        model = make_model()
        seqs = [rng.uniform(0, 1, size=(int(t), SHAPE.M)) for t in rng.integers(1, 7, size=9)]
        single = model.predict_scores(seqs, batch_size=2, threads=1)
        threaded = model.predict_scores(seqs, batch_size=2, threads=3)
        assert single.shape == (9, 3)
        np.testing.assert_allclose(threaded, single, rtol=1e-10)

    def test_threads_from_environment(self, rng, monkeypatch):
        model = make_model()
        seqs = [rng.uniform(0, 1, size=(3, SHAPE.M)) for _ in range(5)]
        monkeypatch.setenv("TTRNN_THREADS", "2")
        np.testing.assert_allclose(
            model.predict_scores(seqs, batch_size=2), model.predict_scores(seqs, batch_size=2, threads=1),
            rtol=1e-10)

    def test_no_sequences(self):
        assert make_model().predict_scores([]).shape == (0, 3)
