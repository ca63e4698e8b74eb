"""Brute-force oracles for checking the approximations in this package.

Nothing here is used by the library itself; these routines exist so tests
(and users) can validate MAP training, Hessians, Laplace evidence and OMA
weights against independent computations on small problems:

* :func:`quadrature_evidence` integrates the evidence on a grid;
* :func:`finite_diff_gradient` / :func:`finite_diff_hessian` are plain
  central differences;
* :func:`exact_map` is a damped Newton solve with the full Hessian;
* :func:`grid_search_beta` enumerates the weight simplex.

They deliberately avoid reusing the library's objective, gradient and
Hessian code.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .exceptions import InvalidInput, NumericalFailure

MAX_QUADRATURE_PARAMS = 6
MIN_GRID_POINTS = 41


# -- finite differences -----------------------------------------------------

def _eval(f, x):
    v = float(f(x))
    if not np.isfinite(v):
        raise NumericalFailure("non-finite function value in finite differences")
    return v


def finite_diff_gradient(f, x, step=1e-5):
    x = np.asarray(x, dtype=np.float64)
    flat = x.ravel()
    g = np.empty_like(flat)
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = step
        g[i] = (_eval(f, (flat + e).reshape(x.shape))
                - _eval(f, (flat - e).reshape(x.shape))) / (2 * step)
    return g.reshape(x.shape)


def finite_diff_hessian(f, x, step=1e-4):
    """Central-difference Hessian over the flattened ``x``; symmetric."""
    x = np.asarray(x, dtype=np.float64)
    flat = x.ravel()
    n = flat.size

    def fv(d):
        return _eval(f, (flat + d).reshape(x.shape))

    f0 = fv(np.zeros(n))
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        H[i, i] = (fv(ei) - 2 * f0 + fv(-ei)) / step ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = step
            H[i, j] = H[j, i] = (fv(ei + ej) - fv(ei - ej) - fv(-ei + ej)
                                 + fv(-ei - ej)) / (4 * step ** 2)
    return H


# -- MAP ----------------------------------------------------------------------

def _softmax_rows(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def exact_map(X, y, alpha, n_classes=None, tol=1e-10, max_iter=500):
    """MAP head by damped Newton iteration on the full ``CD x CD`` Hessian.

    Iterates until the infinity-norm of the gradient of the negative
    log-posterior is at most ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    N, D = X.shape
    C = int(n_classes) if n_classes is not None else int(y.max()) + 1
    Y = np.zeros((N, C))
    Y[np.arange(N), y] = 1.0

    def objective(w):
        Z = X @ w.reshape(C, D).T
        return (np.sum(logsumexp(Z, axis=1)) - np.sum(Z * Y)
                + 0.5 * np.dot(w, w) / alpha)

    def grad(w):
        P = _softmax_rows(X @ w.reshape(C, D).T)
        return ((P - Y).T @ X).ravel() + w / alpha

    def hess(w):
        P = _softmax_rows(X @ w.reshape(C, D).T)
        # sum_n (diag(p_n) - p_n p_n^T) kron x_n x_n^T
        S = np.einsum("nk,kj->nkj", P, np.eye(C)) - np.einsum("nk,nj->nkj", P, P)
        H = np.einsum("nkj,nd,ne->kdje", S, X, X).reshape(C * D, C * D)
        return H + np.eye(C * D) / alpha

    w = np.zeros(C * D)
    f = objective(w)
    for _ in range(max_iter):
        g = grad(w)
        if np.max(np.abs(g)) <= tol:
            return w.reshape(C, D)
        step = np.linalg.solve(hess(w), g)
        decrease = np.dot(g, step)
        if decrease < 1e-12 * (1.0 + abs(f)):
            # quadratic regime: the decrease is below float64 resolution of f
            w = w - step
            f = objective(w)
            continue
        t = 1.0
        while t > 1e-12:
            w_new = w - t * step
            f_new = objective(w_new)
            if f_new <= f - 1e-4 * t * decrease:
                break
            t *= 0.5
        w, f = w_new, f_new
    g = grad(w)
    if np.max(np.abs(g)) <= tol:
        return w.reshape(C, D)
    raise NumericalFailure(
        f"exact_map did not reach tol={tol} (grad={np.max(np.abs(g)):.3g})")


# -- quadrature evidence -----------------------------------------------------

def _diff_log_prior(V, alpha, C):
    """Log density of class differences ``v_c = w_c - w_0``, c = 1..C-1.

    ``V`` has shape (G, C-1, D). Integrating the common shift out of an
    isotropic N(0, alpha) prior leaves N(0, alpha (I + 11^T)) per dimension.
    """
    D = V.shape[2]
    Q = np.sum(V ** 2, axis=1)
    S = np.sum(V, axis=1)
    quad = np.sum(Q - S ** 2 / C, axis=1) / alpha
    log_norm = -0.5 * D * ((C - 1) * np.log(2 * np.pi * alpha) + np.log(C))
    return log_norm - 0.5 * quad


def _log_integrand(points, X, y, alpha, C, chunk=4096):
    D = X.shape[1]
    rows = np.arange(X.shape[0])
    out = np.empty(points.shape[0])
    for s in range(0, points.shape[0], chunk):
        V = points[s:s + chunk].reshape(-1, C - 1, D)
        # logits with class 0 pinned at zero; shape (G, N, C)
        Z = np.concatenate([np.zeros((V.shape[0], X.shape[0], 1)),
                            np.einsum("nd,gcd->gnc", X, V)], axis=2)
        ll = np.sum(Z[:, rows, y] - logsumexp(Z, axis=2), axis=1)
        out[s:s + chunk] = ll + _diff_log_prior(V, alpha, C)
    return out


def _grid(lo, hi, n):
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return axes, mesh.reshape(-1, len(lo))


def _default_points(r):
    return {1: 401, 2: 161, 3: 61}.get(r, MIN_GRID_POINTS)


def quadrature_evidence(X, y, alpha, n_classes=None, points=None, bound=8.0,
                        zoom_threshold=40.0):
    """Log evidence ``log int p(D|W) N(W; 0, alpha I) dW`` by trapezoid rule.

    The softmax likelihood is invariant to adding one vector to every class
    row, so that direction is integrated analytically and the grid spans the
    ``(C-1) * D`` class differences. The box starts at ``bound`` prior
    standard deviations per axis and is shrunk around the region where the
    log integrand is within ``zoom_threshold`` nats of its grid maximum
    before the final ``points``-per-axis trapezoid pass.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInput("X must be 2-D")
    y = np.asarray(y, dtype=np.int64)
    D = X.shape[1]
    if n_classes is None:
        if y.size == 0:
            raise InvalidInput("n_classes is required for empty data")
        n_classes = int(y.max()) + 1
    C = int(n_classes)
    if C * D > MAX_QUADRATURE_PARAMS:
        raise InvalidInput(
            f"quadrature limited to C*D <= {MAX_QUADRATURE_PARAMS}, got {C * D}")
    if not alpha > 0:
        raise InvalidInput("alpha must be positive")
    if C == 1:
        return 0.0
    r = (C - 1) * D
    n_final = int(points) if points is not None else _default_points(r)
    if n_final < MIN_GRID_POINTS:
        raise InvalidInput(f"need at least {MIN_GRID_POINTS} grid points per axis")

    half = bound * np.sqrt(2.0 * alpha)
    lo, hi = np.full(r, -half), np.full(r, half)
    n_zoom = 81 if r <= 2 else MIN_GRID_POINTS
    for _ in range(50):
        axes, pts = _grid(lo, hi, n_zoom)
        logf = _log_integrand(pts, X, y, alpha, C).reshape((n_zoom,) * r)
        keep = logf >= logf.max() - zoom_threshold
        new_lo, new_hi = lo.copy(), hi.copy()
        for a in range(r):
            other = tuple(i for i in range(r) if i != a)
            idx = np.flatnonzero(keep.any(axis=other) if other else keep)
            new_lo[a] = axes[a][max(idx[0] - 1, 0)]
            new_hi[a] = axes[a][min(idx[-1] + 1, n_zoom - 1)]
        if np.all(new_hi - new_lo > 0.5 * (hi - lo)):
            break
        lo, hi = new_lo, new_hi

    axes, pts = _grid(lo, hi, n_final)
    logf = _log_integrand(pts, X, y, alpha, C)
    log_w = np.zeros(pts.shape[0])
    for a in range(r):
        h = (hi[a] - lo[a]) / (n_final - 1)
        w = np.full(n_final, h)
        w[[0, -1]] *= 0.5
        log_w += np.log(w)[np.indices((n_final,) * r)[a].ravel()]
    return float(logsumexp(logf + log_w))


# -- OMA grid search ---------------------------------------------------------

def _simplex_grid(L, K):
    if L == 1:
        return np.ones((1, 1))
    if L == 2:
        k = np.arange(K + 1)
        return np.stack([k, K - k], axis=1) / K
    if L == 3:
        pts = [(i, j, K - i - j) for i in range(K + 1) for j in range(K + 1 - i)]
        return np.asarray(pts, dtype=np.float64) / K
    raise InvalidInput("grid_search_beta supports L <= 3")


def grid_search_beta(probs, lam, beta0=None, resolution=1e-3, chunk=2048):
    """Exhaustive minimization of the OMA objective over a simplex grid.

    Returns ``(beta, objective)`` at the best grid point.
    """
    stack = np.stack([np.asarray(P, dtype=np.float64) for P in probs])
    L = stack.shape[0]
    beta0 = (np.full(L, 1.0 / L) if beta0 is None
             else np.asarray(beta0, dtype=np.float64))
    K = int(round(1.0 / resolution))
    grid = _simplex_grid(L, K)
    best_val, best_beta = np.inf, None
    for s in range(0, grid.shape[0], chunk):
        B = grid[s:s + chunk]
        mixed = np.einsum("gl,lmc->gmc", B, stack)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(mixed > 0, mixed * np.log(mixed), 0.0)
        vals = -terms.sum(axis=2).mean(axis=1) + lam * np.sum((B - beta0) ** 2, axis=1)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_beta = float(vals[i]), B[i].copy()
    return best_beta, best_val


__all__ = [
    "exact_map",
    "finite_diff_gradient",
    "finite_diff_hessian",
    "grid_search_beta",
    "quadrature_evidence",
]
