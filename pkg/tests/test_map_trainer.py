import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmaoma import InvalidInput, LinearHead, TrainConfig, neg_log_posterior, predict_probs, train_map
from bmaoma.map_trainer import log_likelihood, neg_log_posterior_grad
from bmaoma.testing import exact_map, finite_diff_gradient


def _problem(rng, N=30, D=3, C=3):
    X = rng.normal(size=(N, D))
    y = rng.integers(0, C, size=N)
    y[:C] = np.arange(C)
    return X, y


class TestNegLogPosterior:
    def test_zero_weights(self, rng):
        X, y = _problem(rng, N=17, C=4)
        head = LinearHead(np.zeros((4, 3)), alpha=1.0)
        assert neg_log_posterior(head, X, y) == pytest.approx(17 * np.log(4))

    def test_large_alpha_is_pure_nll(self, rng):
        X, y = _problem(rng)
        W = rng.normal(size=(3, 3))
        val = neg_log_posterior(LinearHead(W, alpha=1e12), X, y)
        assert val == pytest.approx(-log_likelihood(W, X, y), rel=1e-10)

    def test_scalar_example(self):
        head = LinearHead([[1.0], [-1.0]], alpha=1.0)
        val = neg_log_posterior(head, np.array([[1.0]]), np.array([0]))
        assert val == pytest.approx(np.log1p(np.exp(-2.0)) + 1.0, abs=1e-12)
        assert val == pytest.approx(1.1269, abs=1e-4)

    def test_gradient_matches_finite_differences(self, rng):
        for _ in range(10):
            X, y = _problem(rng, N=int(rng.integers(5, 40)))
            alpha = float(rng.choice([0.1, 1.0, 10.0]))
            W = rng.normal(size=(3, 3))
            g = neg_log_posterior_grad(LinearHead(W, alpha), X, y)
            fd = finite_diff_gradient(
                lambda w: neg_log_posterior(LinearHead(w, alpha), X, y), W)
            np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-6)

    def test_dimension_mismatch(self, rng):
        X, y = _problem(rng)
        with pytest.raises(InvalidInput):
            neg_log_posterior(LinearHead(np.zeros((3, 5)), 1.0), X, y)


class TestTrainMap:
    def test_zero_features(self):
        X = np.zeros((20, 3))
        y = np.tile([0, 1], 10)
        head = train_map(X, y, alpha=1.0)
        np.testing.assert_allclose(head.weights, 0.0, atol=1e-4)

    def test_four_point_example(self):
        X = np.array([[-1.0], [-1.0], [1.0], [1.0]])
        y = np.array([0, 0, 1, 1])
        head = train_map(X, y, alpha=1.0)
        np.testing.assert_allclose(head.weights, exact_map(X, y, 1.0), atol=1e-3)
        assert head.converged

    def test_class_symmetry(self, rng):
        X, y = _problem(rng, N=40, D=2, C=2)
        a = train_map(X, y, alpha=1.0).weights
        b = train_map(-X, 1 - y, alpha=1.0).weights
        np.testing.assert_allclose(b, -a[::-1], atol=1e-4)

    def test_gradient_tolerance_met(self, rng):
        X, y = _problem(rng, N=200, D=5, C=4)
        head = train_map(X, y, alpha=10.0, cfg=TrainConfig(batch_size=32))
        g = neg_log_posterior_grad(head, X, y)
        assert np.max(np.abs(g)) <= 1e-4
        assert head.converged and head.grad_inf_norm <= 1e-4

    def test_smaller_alpha_never_improves_fit(self, rng):
        X, y = _problem(rng, N=60)
        nll = [-log_likelihood(train_map(X, y, alpha=a).weights, X, y)
               for a in (0.01, 0.1, 1.0, 10.0)]
        assert all(a >= b - 1e-6 for a, b in zip(nll, nll[1:]))

    def test_deterministic(self, rng):
        X, y = _problem(rng, N=50)
        a = train_map(X, y, alpha=1.0, cfg=TrainConfig(batch_size=7, seed=3))
        b = train_map(X, y, alpha=1.0, cfg=TrainConfig(batch_size=7, seed=3))
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_n_classes_override(self, rng):
        X, y = _problem(rng, C=2)
        head = train_map(X, y, alpha=1.0, n_classes=4)
        assert head.weights.shape == (4, 3)

    def test_rejects_bad_alpha(self, rng):
        X, y = _problem(rng)
        with pytest.raises(InvalidInput):
            train_map(X, y, alpha=0.0)

    def test_rejects_single_class(self):
        with pytest.raises(InvalidInput):
            train_map(np.ones((3, 2)), np.zeros(3, dtype=int))

    def test_rejects_nonfinite_features(self, rng):
        X, y = _problem(rng)
        X[0, 0] = np.nan
        with pytest.raises(InvalidInput):
            train_map(X, y)

    @pytest.mark.parametrize("kwargs", [{"learning_rate": 0}, {"epochs": 0},
                                        {"batch_size": 0}, {"grad_tol": -1}])
    def test_config_validation(self, kwargs):
        with pytest.raises(InvalidInput):
            TrainConfig(**kwargs)


class TestPredictProbs:
    def test_zero_weights_uniform(self, rng):
        P = predict_probs(LinearHead(np.zeros((5, 3)), 1.0), rng.normal(size=(4, 3)))
        np.testing.assert_allclose(P, 0.2)

    def test_sigmoid_example(self):
        P = predict_probs(LinearHead([[1.0], [0.0]], 1.0), np.array([[2.0]]))
        s = 1 / (1 + np.exp(-2.0))
        np.testing.assert_allclose(P, [[s, 1 - s]], atol=1e-15)
        np.testing.assert_allclose(P, [[0.8808, 0.1192]], atol=1e-4)

    def test_scaling_limit_one_hot(self, rng):
        W = rng.normal(size=(3, 2))
        X = rng.normal(size=(6, 2))
        P = predict_probs(LinearHead(1e4 * W, 1.0), X)
        np.testing.assert_allclose(P, np.eye(3)[np.argmax(X @ W.T, axis=1)], atol=1e-8)

    @given(st.integers(0, 2**32 - 1))
    def test_rows_on_simplex(self, seed):
        rng = np.random.default_rng(seed)
        W = 50 * rng.normal(size=(4, 3))
        P = predict_probs(LinearHead(W, 1.0), rng.normal(size=(5, 3)))
        assert np.all(P >= 0)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
