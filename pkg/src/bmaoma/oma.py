"""Ensemble weights by entropy minimization (optimizable model averaging).

The weights ``beta`` are fitted on unlabeled data by minimizing::

    J(beta) = mean_m H(sum_l beta_l P_l[m]) + lam * ||beta - beta0||^2

with ``beta_l = softplus(tau_l) / sum_l' softplus(tau_l')`` so that plain
gradient descent on the unconstrained ``tau`` stays on the simplex.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import _entropy, safe_log, softmax, PROB_FLOOR
from .exceptions import InvalidInput, NumericalFailure
from .validation import check_labels, check_prob_list, check_weights

logger = logging.getLogger(__name__)

LAMBDA_GRID = (0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0)

_BETA0_FLOOR = 1e-6
_MONOTONE_SLACK = 1e-8


@dataclass
class OmaConfig:
    lam: float = 0.0
    learning_rate: float = 0.001
    epochs: int = 400
    seed: int = 0
    prior_weights: np.ndarray | None = None

    def __post_init__(self):
        if not self.lam >= 0:
            raise InvalidInput("lambda must be >= 0")
        if not self.learning_rate > 0:
            raise InvalidInput("learning_rate must be positive")
        if int(self.epochs) < 1:
            raise InvalidInput("epochs must be >= 1")
        if self.prior_weights is not None:
            self.prior_weights = check_weights(self.prior_weights,
                                               name="prior_weights")

    def beta0(self, n_models):
        if self.prior_weights is None:
            return np.full(n_models, 1.0 / n_models)
        return check_weights(self.prior_weights, n=n_models,
                             name="prior_weights")


def softplus(t):
    return np.logaddexp(0.0, t)


def inverse_softplus(s):
    s = np.asarray(s, dtype=np.float64)
    # log(exp(s) - 1) = s + log(1 - exp(-s))
    return s + np.log(-np.expm1(-s))


def beta_from_tau(tau):
    tau = np.asarray(tau, dtype=np.float64)
    if not np.all(np.isfinite(tau)):
        raise InvalidInput("tau must be finite")
    s = softplus(tau)
    total = s.sum()
    if not total > 0:
        raise NumericalFailure("all softplus values underflowed to zero")
    return s / total


def tau_from_beta(beta):
    """Inverse of :func:`beta_from_tau` with ``sum softplus(tau) = 1``."""
    beta = np.maximum(np.asarray(beta, dtype=np.float64), _BETA0_FLOOR)
    return inverse_softplus(beta / beta.sum())


def _stack(probs):
    return np.stack(check_prob_list(probs))  # (L, M, C)


def _objective(beta, stack, lam, beta0):
    mixed = np.tensordot(beta, stack, axes=1)
    return float(np.mean(_entropy(mixed)) + lam * np.sum((beta - beta0) ** 2))


def _grad_beta(beta, stack, lam, beta0):
    mixed = np.tensordot(beta, stack, axes=1)
    # d/dP of -P log max(P, floor)
    dH = -(safe_log(mixed) + (mixed >= PROB_FLOOR))
    g = np.einsum("lmc,mc->l", stack, dH) / stack.shape[1]
    return g + 2.0 * lam * (beta - beta0)


def _grad_tau(tau, stack, lam, beta0):
    s = softplus(tau)
    total = s.sum()
    beta = s / total
    g_beta = _grad_beta(beta, stack, lam, beta0)
    # d beta_i / d tau_j = sigmoid(tau_j) (delta_ij - beta_i) / S
    return expit(tau) / total * (g_beta - np.dot(g_beta, beta))


def oma_objective(beta, probs, cfg=None):
    """Average mixture entropy plus the quadratic pull toward ``beta0``."""
    cfg = cfg or OmaConfig()
    stack = _stack(probs)
    beta = check_weights(beta, n=stack.shape[0], name="beta")
    return _objective(beta, stack, cfg.lam, cfg.beta0(stack.shape[0]))


def oma_gradient(tau, probs, cfg=None):
    """Gradient of ``oma_objective(beta_from_tau(tau))`` with respect to tau."""
    cfg = cfg or OmaConfig()
    stack = _stack(probs)
    tau = np.asarray(tau, dtype=np.float64)
    if tau.shape != (stack.shape[0],):
        raise InvalidInput(f"tau has shape {tau.shape}, expected ({stack.shape[0]},)")
    return _grad_tau(tau, stack, cfg.lam, cfg.beta0(stack.shape[0]))


def fit_oma(probs, cfg=None, return_trace=False):
    """Fit ensemble weights by full-batch gradient descent on tau.

    Starts at ``tau0 = tau_from_beta(beta0)``. A step that would increase the
    objective is retried with a halved learning rate, so the recorded
    per-epoch objective trace is non-increasing. ``cfg.seed`` is recorded
    for reproducibility only; the procedure has no randomness.
    """
    cfg = cfg or OmaConfig()
    stack = _stack(probs)
    L = stack.shape[0]
    beta0 = cfg.beta0(L)
    lam = float(cfg.lam)

    tau = tau_from_beta(beta0)
    value = _objective(beta_from_tau(tau), stack, lam, beta0)
    trace = [value]
    lr = float(cfg.learning_rate)
    for epoch in range(int(cfg.epochs)):
        g = _grad_tau(tau, stack, lam, beta0)
        if not np.all(np.isfinite(g)):
            raise NumericalFailure(f"non-finite gradient at epoch {epoch}")
        step = lr
        for _ in range(60):
            cand = tau - step * g
            cand_value = _objective(beta_from_tau(cand), stack, lam, beta0)
            if np.isnan(cand_value):
                raise NumericalFailure(f"NaN objective at epoch {epoch}")
            if cand_value <= value + _MONOTONE_SLACK:
                break
            step *= 0.5
        else:
            cand, cand_value = tau, value
        tau, value = cand, cand_value
        trace.append(value)
    beta = beta_from_tau(tau)
    if return_trace:
        return beta, trace
    return beta


def zeroshot_prior_weights(probs_train, labels):
    """Prior weights from each model's mean training log-likelihood."""
    stack = _stack(probs_train)
    labels, _ = check_labels(labels, n_classes=stack.shape[2],
                             n_samples=stack.shape[1], name="labels")
    rows = np.arange(stack.shape[1])
    scores = safe_log(stack[:, rows, labels]).mean(axis=1)
    return softmax(scores)
