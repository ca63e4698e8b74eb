"""Numerically stable probability primitives and classification metrics.

All logarithms are natural, so entropies are in nats. Every log of a
probability goes through :data:`PROB_FLOOR` so that one-hot predictions
(e.g. from zeroshot models) never produce ``-inf``.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.metrics import accuracy_score, f1_score, matthews_corrcoef

from .exceptions import InvalidInput
from .validation import SIMPLEX_TOL, check_prob_list, check_weights

PROB_FLOOR = 1e-12

METRICS = ("accuracy", "f1_binary", "mcc", "acc_f1_avg")


def safe_log(p):
    return np.log(np.maximum(p, PROB_FLOOR))


def log_sum_exp(v, axis=-1):
    """``log(sum(exp(v)))`` along ``axis`` using the max-shift trick."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0 or v.shape[axis] == 0:
        raise InvalidInput("log_sum_exp of an empty input")
    vmax = np.max(v, axis=axis, keepdims=True)
    out = vmax + np.log(np.sum(np.exp(v - vmax), axis=axis, keepdims=True))
    out = np.squeeze(out, axis=axis)
    return float(out) if out.ndim == 0 else out


def softmax(v, axis=-1):
    v = np.asarray(v, dtype=np.float64)
    z = np.exp(v - np.max(v, axis=axis, keepdims=True))
    return z / np.sum(z, axis=axis, keepdims=True)


def _check_simplex(p, name):
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0):
        raise InvalidInput(f"{name} has negative entries")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise InvalidInput(f"{name} is not on the probability simplex")
    return p


def _entropy(p):
    # 0 * log 0 := 0 falls out of the floor: 0 * log(1e-12) == 0.
    return -np.sum(p * safe_log(p), axis=-1)


def entropy(p):
    """Shannon entropy in nats along the last axis.

    Accepts a single probability vector (returns a float) or an ``M x C``
    matrix (returns the ``M`` row entropies).
    """
    p = _check_simplex(p, "p")
    h = np.clip(_entropy(p), 0.0, np.log(p.shape[-1]))
    return float(h) if np.ndim(h) == 0 else h


def cross_entropy(p, q):
    """``-sum_c p_c log q_c`` along the last axis, with ``q`` floored."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise InvalidInput(f"length mismatch: {p.shape} vs {q.shape}")
    h = -np.sum(p * safe_log(q), axis=-1)
    return float(h) if np.ndim(h) == 0 else h


def mix(probs, weights):
    """Weighted average of ``L`` probability matrices.

    ``out[m, c] = sum_l weights[l] * probs[l][m, c]``.
    """
    probs = check_prob_list(probs)
    weights = check_weights(weights, n=len(probs))
    return np.tensordot(weights, np.stack(probs), axes=1)


def predicted_labels(pred):
    """Hard labels from class indices or a probability matrix.

    ``np.argmax`` returns the first maximum, so ties go to the lowest index.
    """
    pred = np.asarray(pred)
    if pred.ndim == 2:
        return np.argmax(pred, axis=1), pred.shape[1]
    return pred.astype(np.int64), None


def metric(pred, labels, kind="accuracy", n_classes=None):
    """Score hard or probabilistic predictions against labels.

    Parameters
    ----------
    pred : array-like
        Either an ``M x C`` probability matrix (argmax rule) or ``M``
        predicted class indices.
    labels : array-like of int
        True class indices.
    kind : {"accuracy", "f1_binary", "mcc", "acc_f1_avg"}
        The binary metrics use class 1 as the positive class.
    n_classes : int, optional
        Number of classes; inferred from ``pred`` columns or the data.
    """
    if kind not in METRICS:
        raise InvalidInput(f"unknown metric {kind!r}; expected one of {METRICS}")
    y_pred, c_pred = predicted_labels(pred)
    y_true = np.asarray(labels).astype(np.int64)
    if y_pred.shape != y_true.shape:
        raise InvalidInput(
            f"{y_pred.shape[0]} predictions for {y_true.shape[0]} labels")
    if n_classes is None:
        n_classes = c_pred
    if n_classes is None:
        n_classes = int(max(y_pred.max(), y_true.max())) + 1

    if kind == "accuracy":
        return float(accuracy_score(y_true, y_pred))
    if n_classes != 2:
        raise InvalidInput(f"{kind} requires C=2, got C={n_classes}")
    if kind == "mcc":
        with warnings.catch_warnings():
            # single-class inputs score 0, the warning adds nothing
            warnings.filterwarnings("ignore", "A single label", UserWarning)
            return float(matthews_corrcoef(y_true, y_pred))
    f1 = float(f1_score(y_true, y_pred, labels=[0, 1], pos_label=1,
                        average="binary", zero_division=0))
    if kind == "f1_binary":
        return f1
    return 0.5 * (float(accuracy_score(y_true, y_pred)) + f1)
