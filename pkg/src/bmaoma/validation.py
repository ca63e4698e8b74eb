"""Input validation helpers.

These mirror ``sklearn.utils.validation``: each ``check_*`` function takes
user input, coerces it to a float64/int64 ndarray and raises
:class:`~bmaoma.exceptions.InvalidInput` when a precondition fails.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidInput

SIMPLEX_TOL = 1e-6
WEIGHT_TOL = 1e-9
# rows this close to 1 are already normalized up to rounding; leave them alone
_ROUNDING_TOL = 1e-12


def check_features(X, name="X"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D (N x D), got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidInput(f"{name} must have N >= 1 and D >= 1, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInput(f"{name} contains non-finite values")
    return X


def check_labels(y, n_classes=None, n_samples=None, name="y"):
    """Validate class indices and return ``(y, n_classes)``.

    When ``n_classes`` is None it is inferred as ``max(y) + 1``.
    """
    y = np.asarray(y)
    if y.ndim != 1:
        raise InvalidInput(f"{name} must be 1-D, got shape {y.shape}")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise InvalidInput(f"{name} must contain integer class indices")
    y = y.astype(np.int64)
    if n_samples is not None and y.shape[0] != n_samples:
        raise InvalidInput(
            f"{name} has {y.shape[0]} entries, expected {n_samples}")
    if n_classes is None:
        n_classes = int(y.max()) + 1 if y.size else 0
    n_classes = int(n_classes)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise InvalidInput(f"{name} contains indices outside [0, {n_classes})")
    return y, n_classes


def check_prob_matrix(P, name="probs", tol=SIMPLEX_TOL):
    """Validate a row-stochastic matrix, renormalizing rows within ``tol``."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim == 1:
        P = P[None, :]
    if P.ndim != 2 or P.shape[1] < 1:
        raise InvalidInput(f"{name} must be 2-D (M x C), got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise InvalidInput(f"{name} contains non-finite values")
    if np.any(P < 0) or np.any(P > 1 + tol):
        raise InvalidInput(f"{name} has entries outside [0, 1]")
    sums = P.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > tol):
        worst = int(np.argmax(np.abs(sums - 1.0)))
        raise InvalidInput(
            f"{name} row {worst} sums to {sums[worst]!r}, not 1 within {tol}")
    off = np.abs(sums - 1.0) > _ROUNDING_TOL
    if np.any(off):
        P = P.copy()
        P[off] /= sums[off, None]
    return P


def check_prob_list(probs, name="probs"):
    """Validate a non-empty list of equally shaped probability matrices."""
    if isinstance(probs, np.ndarray) and probs.ndim == 2:
        probs = [probs]
    probs = [check_prob_matrix(P, name=f"{name}[{i}]")
             for i, P in enumerate(probs)]
    if not probs:
        raise InvalidInput(f"{name} must contain at least one matrix")
    shape = probs[0].shape
    for i, P in enumerate(probs):
        if P.shape != shape:
            raise InvalidInput(
                f"{name}[{i}] has shape {P.shape}, expected {shape}")
    return probs


def check_weights(w, n=None, name="weights", tol=WEIGHT_TOL):
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.size < 1:
        raise InvalidInput(f"{name} must be non-empty")
    if n is not None and w.size != n:
        raise InvalidInput(f"{name} has length {w.size}, expected {n}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidInput(f"{name} must be finite and non-negative")
    if abs(w.sum() - 1.0) > tol:
        raise InvalidInput(f"{name} sums to {w.sum()!r}, not 1")
    return w
