"""MAP training of multi-class logistic-regression heads on frozen features.

The head is a ``C x D`` weight matrix (no bias) under an isotropic Gaussian
prior ``N(0, alpha I)``. The objective minimized here is the negative
unnormalized log-posterior without its constant normalizer::

    f(W) = -sum_n log softmax(W x_n)[y_n] + ||W||^2 / (2 alpha)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import log_sum_exp, softmax
from .exceptions import InvalidInput, NumericalFailure
from .validation import check_features, check_labels

logger = logging.getLogger(__name__)

ALPHA_GRID = (0.01, 0.1, 1.0, 10.0, 50.0, 100.0)

# slack allowed on the epoch-level objective checkpoints
_MONOTONE_SLACK = 1e-8


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 1000
    seed: int = 0
    grad_tol: float = 1e-4
    max_polish_iter: int = 20000

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidInput("learning_rate must be positive")
        if int(self.epochs) < 1:
            raise InvalidInput("epochs must be >= 1")
        if int(self.batch_size) < 1:
            raise InvalidInput("batch_size must be >= 1")
        if not self.grad_tol > 0:
            raise InvalidInput("grad_tol must be positive")


@dataclass
class LinearHead:
    """A trained ``C x D`` head plus the prior variance it was trained under."""

    weights: np.ndarray
    alpha: float
    n_train: int = 0
    converged: bool = False
    grad_inf_norm: float = float("nan")
    objective: float = float("nan")
    objective_trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=np.float64))
        if not np.all(np.isfinite(self.weights)):
            raise InvalidInput("head weights must be finite")
        if not self.alpha > 0:
            raise InvalidInput(f"alpha must be positive, got {self.alpha!r}")
        self.alpha = float(self.alpha)

    @property
    def n_classes(self):
        return self.weights.shape[0]

    @property
    def n_features(self):
        return self.weights.shape[1]


def _check_dims(weights, X, y=None):
    if X.shape[1] != weights.shape[1]:
        raise InvalidInput(
            f"features have D={X.shape[1]}, head expects D={weights.shape[1]}")
    if y is not None and y.shape[0] != X.shape[0]:
        raise InvalidInput(f"{y.shape[0]} labels for {X.shape[0]} rows")


def log_likelihood(weights, X, y):
    """Data log-likelihood ``sum_n log softmax(W x_n)[y_n]``."""
    logits = X @ weights.T
    return float(np.sum(logits[np.arange(X.shape[0]), y])
                 - np.sum(log_sum_exp(logits, axis=1)))


def _objective_and_grad(weights, X, y, alpha):
    logits = X @ weights.T
    lse = log_sum_exp(logits, axis=1)
    rows = np.arange(X.shape[0])
    nll = np.sum(lse) - np.sum(logits[rows, y])
    P = np.exp(logits - lse[:, None])
    P[rows, y] -= 1.0
    value = nll + 0.5 * np.sum(weights * weights) / alpha
    grad = P.T @ X + weights / alpha
    return value, grad


def neg_log_posterior(head, X, y):
    """Negative unnormalized log-posterior of ``head`` on ``(X, y)``."""
    X = check_features(X)
    y, _ = check_labels(y, n_classes=head.n_classes)
    _check_dims(head.weights, X, y)
    return float(_objective_and_grad(head.weights, X, y, head.alpha)[0])


def neg_log_posterior_grad(head, X, y):
    """Gradient of :func:`neg_log_posterior` with respect to the weights."""
    X = check_features(X)
    y, _ = check_labels(y, n_classes=head.n_classes)
    _check_dims(head.weights, X, y)
    return _objective_and_grad(head.weights, X, y, head.alpha)[1]


def _sgd_phase(W, X, y, alpha, cfg, trace):
    n = X.shape[0]
    batch = min(int(cfg.batch_size), n)
    # step capped at 1/L, L bounding the curvature of the per-datapoint objective
    curv = 0.5 * np.max(np.sum(X * X, axis=1)) + 1.0 / (alpha * n)
    lr = min(cfg.learning_rate, 1.0 / curv)
    rng = np.random.default_rng(cfg.seed)
    best = trace[-1]
    for epoch in range(int(cfg.epochs)):
        W_prev = W.copy()
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            Xb, yb = X[idx], y[idx]
            P = softmax(Xb @ W.T, axis=1)
            P[np.arange(idx.size), yb] -= 1.0
            W = W - lr * ((P.T @ Xb) / idx.size + W / (alpha * n))
        if not np.all(np.isfinite(W)):
            raise NumericalFailure(f"non-finite weights at epoch {epoch}")
        value = _objective_and_grad(W, X, y, alpha)[0]
        if value > best + _MONOTONE_SLACK:
            # reject the epoch; minibatch noise overshot the checkpoint
            W = W_prev
            lr *= 0.5
            continue
        best = value
        trace.append(float(value))
    return W


def _polish(W, X, y, alpha, cfg):
    shape = W.shape

    def fun(w):
        value, grad = _objective_and_grad(w.reshape(shape), X, y, alpha)
        return value, grad.ravel()

    res = minimize(fun, W.ravel(), jac=True, method="L-BFGS-B",
                   options={"maxiter": int(cfg.max_polish_iter), "ftol": 0.0,
                            "gtol": 1e-2 * cfg.grad_tol, "maxcor": 20})
    return res.x.reshape(shape)


def train_map(X, y, alpha=1.0, cfg=None, n_classes=None):
    """Fit the MAP head by minibatch gradient descent plus a full-batch polish.

    Parameters
    ----------
    X : array-like of shape (N, D)
        Frozen features.
    y : array-like of shape (N,)
        Class indices in ``[0, n_classes)``.
    alpha : float
        Prior variance of every weight.
    cfg : TrainConfig, optional
    n_classes : int, optional
        Defaults to ``max(y) + 1``.

    Returns
    -------
    LinearHead
        ``converged`` is True when the full-batch gradient infinity-norm is
        at most ``cfg.grad_tol``. Non-convergence is reported, not raised.
    """
    cfg = cfg or TrainConfig()
    X = check_features(X)
    y, n_classes = check_labels(y, n_classes=n_classes, n_samples=X.shape[0])
    if n_classes < 2:
        raise InvalidInput("need at least two classes")
    if not alpha > 0:
        raise InvalidInput(f"alpha must be positive, got {alpha!r}")
    alpha = float(alpha)

    W = np.zeros((n_classes, X.shape[1]))
    trace = [float(_objective_and_grad(W, X, y, alpha)[0])]
    W = _sgd_phase(W, X, y, alpha, cfg, trace)

    value, grad = _objective_and_grad(W, X, y, alpha)
    if np.max(np.abs(grad)) > cfg.grad_tol:
        W_polished = _polish(W, X, y, alpha, cfg)
        v_polished, g_polished = _objective_and_grad(W_polished, X, y, alpha)
        if np.isfinite(v_polished) and v_polished <= value:
            W, value, grad = W_polished, v_polished, g_polished
    if not (np.isfinite(value) and np.all(np.isfinite(W))):
        raise NumericalFailure("MAP training produced non-finite values")
    trace.append(float(value))

    g_inf = float(np.max(np.abs(grad)))
    converged = g_inf <= cfg.grad_tol
    if not converged:
        logger.warning("MAP training stopped at grad inf-norm %.3g > %.3g",
                       g_inf, cfg.grad_tol)
    return LinearHead(weights=W, alpha=alpha, n_train=X.shape[0],
                      converged=converged, grad_inf_norm=g_inf,
                      objective=float(value), objective_trace=trace)


def predict_probs(head, X):
    """Row-wise ``softmax(W x_n)`` at the head's weights."""
    X = check_features(X)
    _check_dims(head.weights, X)
    return softmax(X @ head.weights.T, axis=1)
