"""Laplace-approximated model evidence with block-diagonal Hessians.

For a head ``W`` at its MAP estimate the negative log-likelihood Hessian has
``C x C`` blocks of size ``D x D``::

    H_kk  = (N/M) sum_i p_k (1 - p_k) x_i x_i^T
    H_kk' = -(N/M) sum_i p_k p_k'     x_i x_i^T      (k != k')

Only the diagonal blocks enter the evidence; the full matrix is available
for inspection through :func:`hessian_dump`.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .core import softmax
from .exceptions import InvalidInput, NumericalFailure
from .map_trainer import _check_dims, log_likelihood
from .validation import check_features, check_labels

logger = logging.getLogger(__name__)

DEFAULT_SUBSAMPLE = 50000


@dataclass
class HessianBlocks:
    blocks: np.ndarray  # (C, D, D)
    subsample: int
    n_total: int
    seed: int | None = None

    @property
    def n_classes(self):
        return self.blocks.shape[0]

    @property
    def n_features(self):
        return self.blocks.shape[1]


@dataclass
class EvidenceRecord:
    """The terms of the Laplace log evidence for one candidate model."""

    log_lik_map: float
    prior_quad: float
    log_det_term: float
    n_train: int
    alpha: float
    model_id: str | None = None

    @property
    def total(self):
        return self.log_lik_map - self.prior_quad - self.log_det_term

    def to_dict(self):
        d = asdict(self)
        d["total"] = self.total
        return d


def _subsample_rows(n, m, seed):
    if m is None:
        m = min(n, DEFAULT_SUBSAMPLE)
    m = int(m)
    if m < 1:
        raise InvalidInput("subsample size must be >= 1")
    if m >= n:
        return None, n
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False)), m


def _sampled_probs(X, head, subsample, seed):
    X = check_features(X)
    _check_dims(head.weights, X)
    n = X.shape[0]
    idx, m = _subsample_rows(n, subsample, seed)
    if idx is not None:
        X = X[idx]
    return X, softmax(X @ head.weights.T, axis=1), n, m


def _weighted_gram(X, w, scale):
    G = (X * (scale * w)[:, None]).T @ X
    return 0.5 * (G + G.T)


def hessian_blocks(X, head, subsample=None, seed=0):
    """Diagonal Hessian blocks of the negative log-likelihood at ``head``.

    ``subsample`` rows are drawn uniformly without replacement (sorted, so
    accumulation order is fixed) and the result is rescaled by ``N/M``.
    ``subsample >= N`` uses every row in the original order.
    """
    if subsample is not None and int(subsample) < 1:
        raise InvalidInput("subsample size must be >= 1")
    X, P, n, m = _sampled_probs(X, head, subsample, seed)
    scale = n / m
    blocks = np.stack([_weighted_gram(X, P[:, k] * (1.0 - P[:, k]), scale)
                       for k in range(P.shape[1])])
    return HessianBlocks(blocks=blocks, subsample=m, n_total=n, seed=seed)


def block_eigenvalues(h):
    """Concatenated per-block eigenvalues, clamped at 0, descending per block."""
    out = []
    for k, block in enumerate(h.blocks):
        try:
            lam = np.linalg.eigvalsh(block)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"eigensolver failed on block {k}") from exc
        out.append(np.maximum(lam, 0.0)[::-1])
    return np.concatenate(out)


def log_evidence(X, y, head, eigs, minibatch_likelihood=False, subsample=None,
                 seed=0, model_id=None):
    """Laplace log evidence of a trained head.

    ``total = log p(D|W) - ||W||^2 / (2 alpha) - 1/2 sum_j log(alpha lam_j + 1)``.

    The likelihood term is computed on all of ``X`` unless
    ``minibatch_likelihood`` is set, in which case it is the ``N/M``-scaled
    sum over the same subsample used for the Hessian.
    """
    X = check_features(X)
    y, _ = check_labels(y, n_classes=head.n_classes, n_samples=X.shape[0])
    _check_dims(head.weights, X, y)
    alpha = float(head.alpha)
    if not alpha > 0:
        raise InvalidInput("alpha must be positive")
    eigs = np.maximum(np.asarray(eigs, dtype=np.float64), 0.0)

    n = X.shape[0]
    if minibatch_likelihood:
        idx, m = _subsample_rows(n, subsample, seed)
        if idx is None:
            ll = log_likelihood(head.weights, X, y)
        else:
            ll = (n / m) * log_likelihood(head.weights, X[idx], y[idx])
    else:
        ll = log_likelihood(head.weights, X, y)
    prior_quad = 0.5 * float(np.sum(head.weights ** 2)) / alpha
    log_det = 0.5 * float(np.sum(np.log1p(alpha * eigs)))
    return EvidenceRecord(log_lik_map=float(ll), prior_quad=prior_quad,
                          log_det_term=log_det, n_train=n, alpha=alpha,
                          model_id=model_id)


def posterior_weights(records):
    """Normalized model weights from per-datapoint log evidences.

    Each total log evidence is divided by its training-set size before the
    softmax across models (uniform model prior).
    """
    records = list(records)
    if not records:
        raise InvalidInput("need at least one evidence record")
    scores = []
    for r in records:
        if r.n_train <= 0:
            raise InvalidInput("evidence record with n_train <= 0")
        scores.append(r.total / r.n_train)
    return softmax(np.asarray(scores))


def full_hessian(X, head, subsample=None, seed=0):
    """Dense ``CD x CD`` Hessian, index ``k * D + d`` for class k, dim d."""
    X, P, n, m = _sampled_probs(X, head, subsample, seed)
    C, D = head.weights.shape
    scale = n / m
    H = np.empty((C * D, C * D))
    for k in range(C):
        for j in range(k, C):
            if j == k:
                w = P[:, k] * (1.0 - P[:, k])
            else:
                w = -P[:, k] * P[:, j]
            G = _weighted_gram(X, w, scale)
            H[k * D:(k + 1) * D, j * D:(j + 1) * D] = G
            H[j * D:(j + 1) * D, k * D:(k + 1) * D] = G
    return H


def hessian_dump(X, head, n_classes, n_dims, seed=0, subsample=None):
    """Hessian restricted to a random subset of classes and feature dims.

    Returns ``(table, classes, dims)`` where ``table`` has shape
    ``(n_classes * n_dims,) * 2`` indexed ``a * n_dims + b`` for the a-th
    sampled class and b-th sampled dimension. Both subsets are drawn
    uniformly without replacement and sorted.
    """
    C, D = head.weights.shape
    n_classes, n_dims = int(n_classes), int(n_dims)
    if not (1 <= n_classes <= C and 1 <= n_dims <= D):
        raise InvalidInput(
            f"subset {n_classes}x{n_dims} not within available {C}x{D}")
    rng = np.random.default_rng(seed)
    classes = np.sort(rng.choice(C, size=n_classes, replace=False))
    dims = np.sort(rng.choice(D, size=n_dims, replace=False))
    H = full_hessian(X, head, subsample=subsample, seed=seed)
    flat = (classes[:, None] * D + dims[None, :]).ravel()
    return H[np.ix_(flat, flat)], classes, dims


def diagonal_dominance(table, n_dims):
    """Mean |entry| inside diagonal class blocks over mean |entry| outside."""
    k = table.shape[0] // n_dims
    cls = np.repeat(np.arange(k), n_dims)
    same = cls[:, None] == cls[None, :]
    off = np.abs(table[~same])
    if off.size == 0:
        return float("inf")
    denom = off.mean()
    return float("inf") if denom == 0 else float(np.abs(table[same]).mean() / denom)


def write_hessian_csv(table, path):
    """Write ``i,j,value`` rows, row-major, full-precision decimals."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "value"])
        n = table.shape[0]
        for i in range(n):
            for j in range(n):
                writer.writerow([i, j, repr(float(table[i, j]))])
