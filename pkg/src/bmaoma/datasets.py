"""Seeded synthetic fixtures standing in for frozen foundation-model features."""

from __future__ import annotations

import numpy as np


def _gaussian_classes(rng, labels, means, scale=1.0):
    return means[labels] + scale * rng.normal(size=(labels.size, means.shape[1]))


def make_extractor_fixture(n_train=2000, n_val=2000, n_classes=5, n_features=8,
                           n_noise_models=2, separation=1.0, seed=0):
    """One class-informative "extractor" plus pure-noise ones.

    The informative model's features are Gaussian around a per-class mean
    (means drawn with standard deviation ``separation``); every noise model
    emits standard normal features independent of the label.

    Returns
    -------
    dict
        ``{"ids": [...], "n_classes": C, "train": {"features": [...],
        "labels": y}, "val": {...}}`` with one feature matrix per model,
        informative model first.
    """
    rng = np.random.default_rng(seed)
    means = separation * rng.normal(size=(n_classes, n_features))
    ids = ["informative"] + [f"noise_{i}" for i in range(n_noise_models)]
    out = {"ids": ids, "n_classes": n_classes}
    for split, n in (("train", n_train), ("val", n_val)):
        y = rng.integers(0, n_classes, size=n)
        feats = [_gaussian_classes(rng, y, means)]
        feats += [rng.normal(size=(n, n_features)) for _ in range(n_noise_models)]
        out[split] = {"features": feats, "labels": y}
    return out


def make_shift_fixture(n_train=1000, n_val=500, n_classes=4, n_features=6,
                       shift_scale=0.15, seed=0):
    """Two models where the training favourite degrades under a shift.

    On the training split model A sees well separated classes and model B
    moderately separated ones. On the shifted validation split model A's
    features collapse toward the origin (scaled by ``shift_scale``), so its
    predictions flatten toward uniform while model B is unaffected.
    """
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(n_classes, n_features))
    out = {"ids": ["A", "B"], "n_classes": n_classes}

    y = rng.integers(0, n_classes, size=n_train)
    out["train"] = {"labels": y, "features": [
        _gaussian_classes(rng, y, 3.0 * means),
        _gaussian_classes(rng, y, 1.5 * means)]}

    y = rng.integers(0, n_classes, size=n_val)
    out["val"] = {"labels": y, "features": [
        shift_scale * _gaussian_classes(rng, y, 3.0 * means),
        _gaussian_classes(rng, y, 1.5 * means)]}
    return out


def make_evidence_benchmark(n_instances=100, seed=2024):
    """Small binary problems for checking evidence approximations.

    Each instance has ``N`` in [20, 100], ``D`` in {1, 2}, a prior variance
    from {0.1, 1, 10} and two candidate feature matrices for the same
    labels. Model ``l`` shifts class means by ``sep_l * (2y - 1) * u_l`` for
    a random unit direction ``u_l`` and ``sep_l ~ U(0, 1.5)``, so the two
    candidates differ in how informative they are.

    Yields dicts ``{"alpha", "labels", "features": [X_0, X_1]}``.
    """
    rng = np.random.default_rng(seed)
    for _ in range(n_instances):
        n = int(rng.integers(20, 101))
        d = int(rng.integers(1, 3))
        alpha = float(rng.choice([0.1, 1.0, 10.0]))
        y = rng.integers(0, 2, size=n)
        feats = []
        for _ in range(2):
            sep = rng.uniform(0, 1.5)
            u = rng.normal(size=d)
            u /= np.linalg.norm(u)
            feats.append(sep * (2 * y[:, None] - 1) * u + rng.normal(size=(n, d)))
        yield {"alpha": alpha, "labels": y, "features": feats}
