"""Combine member predictions under BMA, OMA or plain output averaging."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import metric, mix
from .exceptions import InvalidInput
from .validation import check_prob_list, check_weights

MODES = ("bma", "oma", "output_avg")
_MODE_ALIASES = {"avg": "output_avg"}


@dataclass
class EnsembleSpec:
    mode: str
    weights: np.ndarray | None = None
    member_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.mode = _MODE_ALIASES.get(self.mode, self.mode)
        if self.mode not in MODES:
            raise InvalidInput(f"unknown ensemble mode {self.mode!r}")
        if self.weights is not None:
            self.weights = check_weights(self.weights)
            if self.member_ids and len(self.member_ids) != self.weights.size:
                raise InvalidInput("member count does not match weights length")
        elif self.mode != "output_avg":
            raise InvalidInput(f"mode {self.mode!r} needs weights")

    def effective_weights(self, n_members):
        if self.mode == "output_avg":
            return np.full(n_members, 1.0 / n_members)
        if self.weights.size != n_members:
            raise InvalidInput(
                f"{n_members} members but {self.weights.size} weights")
        return self.weights


def ensemble_predict(spec, probs):
    probs = check_prob_list(probs)
    return mix(probs, spec.effective_weights(len(probs)))


def evaluate(spec, probs, labels, kind="accuracy"):
    """Ensemble and per-member scores plus deltas in percentage points.

    The returned dict has a fixed key order so it serializes identically
    across runs.
    """
    probs = check_prob_list(probs)
    ids = list(spec.member_ids) or [f"model_{i}" for i in range(len(probs))]
    if len(ids) != len(probs):
        raise InvalidInput("member id count does not match probs")
    weights = spec.effective_weights(len(probs))
    members = [metric(P, labels, kind) for P in probs]
    ens = metric(mix(probs, weights), labels, kind)
    avg = metric(mix(probs, np.full(len(probs), 1.0 / len(probs))), labels,
                 kind)
    return {
        "mode": spec.mode,
        "weights": [float(w) for w in weights],
        "members": [{"id": i, "metric": m} for i, m in zip(ids, members)],
        "ensemble_metric": ens,
        "delta_vs_output_avg": 100.0 * (ens - avg),
        "delta_vs_best_member": 100.0 * (ens - max(members)),
    }
