"""Variable selection from a fitted model: inclusion probabilities,
thresholding, and decoupled shrinkage-and-selection (DSS) by adaptive LASSO.

The DSS problem for penalty ``lam`` is

    min_theta (1/n) ||X beta_hat - X theta||^2 + lam * sum_j w_j |theta_j|,

with ``w_j = 1/|beta_hat_j|``. It is solved in Gram form, G = X'X/n and
c = G beta_hat, so one coordinate step costs O(p).
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numba
import numpy as np

from .errors import NonConvergence, ValidationError
from .model import PosteriorDraws
from .vb import VBState, vb_inclusion_probs

ZERO_WEIGHT_CUTOFF = 1e-12
KKT_TOL = 1e-8
DEFAULT_GRID_SIZE = 50
DEFAULT_GRID_RATIO = 1e-4


@dataclass
class SelectionResult:
    scores: np.ndarray
    selected: np.ndarray
    method: str
    dss_lambda: float | None = None
    theta: np.ndarray | None = None

    def __post_init__(self):
        if self.method not in ("threshold", "dss"):
            raise ValidationError(f"unknown selection method {self.method!r}")

    def to_dict(self) -> dict:
        return dict(
            method=self.method,
            dss_lambda=self.dss_lambda,
            scores=np.asarray(self.scores).tolist(),
            selected=(np.flatnonzero(self.selected) + 1).tolist(),
            theta=None if self.theta is None else np.asarray(self.theta).tolist(),
        )


def inclusion_probs(fit) -> np.ndarray:
    """E[lambda_j^2 / (1 + lambda_j^2)] for each covariate.

    Gibbs draws are averaged; a variational fit is integrated against its
    q(lambda_j) factors. A mapping (a saved fit summary) must carry the
    scores under ``"inclusion"``.
    """
    if isinstance(fit, VBState):
        return np.clip(vb_inclusion_probs(fit), 0.0, 1.0)
    if isinstance(fit, PosteriorDraws):
        lam = np.asarray(fit.arrays["lam"], float)
        if lam.shape[0] == 0:
            raise ValueError("no retained draws")
        # l^2/(1+l^2) written to stay exact for tiny and huge l
        return np.mean(1.0 / (1.0 + lam**-2.0), axis=0)
    if isinstance(fit, Mapping):  # a saved fit summary
        return np.asarray(fit["inclusion"], float)
    raise TypeError(f"cannot compute inclusion probabilities from {type(fit).__name__}")


def threshold_select(scores, t: float = 0.5) -> np.ndarray:
    return np.asarray(scores, float) > t


# ---------------------------------------------------------------- DSS path

def dss_weights(beta_hat, penalize_intercept: bool = True) -> np.ndarray:
    """Adaptive weights 1/|beta_hat_j|; +inf pins a coefficient at zero."""
    b = np.abs(np.asarray(beta_hat, float))
    with np.errstate(divide="ignore"):
        w = np.where(b < ZERO_WEIGHT_CUTOFF, np.inf, 1.0 / b)
    if not penalize_intercept:
        w[0] = 0.0
    return w


def dss_objective(X, beta_hat, theta, lam, weights) -> float:
    X = np.asarray(X, float)
    r = X @ (np.asarray(beta_hat) - np.asarray(theta))
    theta = np.asarray(theta, float)
    nz = theta != 0
    pen = np.sum(np.asarray(weights, float)[nz] * np.abs(theta[nz]))
    return float(r @ r / X.shape[0] + lam * pen)


def lambda_max(X, beta_hat, weights=None) -> float:
    """Smallest penalty whose solution is identically zero (over penalised
    coordinates with finite weight)."""
    X = np.asarray(X, float)
    beta_hat = np.asarray(beta_hat, float)
    w = dss_weights(beta_hat) if weights is None else np.asarray(weights, float)
    grad = 2.0 * X.T @ (X @ beta_hat) / X.shape[0]
    ok = np.isfinite(w) & (w > 0)
    if not ok.any():
        return 0.0
    return float(np.max(np.abs(grad[ok]) / w[ok]))


def default_grid(X, beta_hat, weights=None, size: int = DEFAULT_GRID_SIZE,
                 ratio: float = DEFAULT_GRID_RATIO) -> np.ndarray:
    top = lambda_max(X, beta_hat, weights)
    if top <= 0:
        return np.array([1.0])
    return np.geomspace(top, ratio * top, size)


@numba.njit(cache=True)
def _kkt(G, c, theta, lam, w):
    worst = 0.0
    for j in range(theta.size):
        if not np.isfinite(w[j]):
            continue
        g = 2.0 * (G[j] @ theta - c[j])
        pen = lam * w[j]
        if theta[j] != 0.0:
            v = abs(g + pen * np.sign(theta[j]))
        else:
            v = max(abs(g) - pen, 0.0)
        worst = max(worst, v)
    return worst


@numba.njit(cache=True)
def _coord(G, grad, theta, j, lam, w):
    """Exact minimisation along coordinate j; returns the scaled step size."""
    if not np.isfinite(w[j]) or G[j, j] <= 0.0:
        new = 0.0
    else:
        z = G[j, j] * theta[j] - grad[j]
        thr = 0.5 * lam * w[j]
        if z > thr:
            new = (z - thr) / G[j, j]
        elif z < -thr:
            new = (z + thr) / G[j, j]
        else:
            new = 0.0
    delta = new - theta[j]
    if delta == 0.0:
        return 0.0
    theta[j] = new
    grad += G[:, j] * delta
    return abs(delta) * np.sqrt(max(G[j, j], 0.0))


@numba.njit(cache=True)
def _cd(G, c, theta, lam, w, tol, max_sweeps):
    """Coordinate descent: a full sweep, then sweeps over the nonzero set
    until they stall, repeated until the KKT residual is below ``tol``.

    Returns (sweeps used, final KKT residual)."""
    p = theta.size
    grad = G @ theta - c  # half the gradient of the smooth part
    sweeps = 0
    k = np.inf
    while sweeps < max_sweeps:
        for j in range(p):
            _coord(G, grad, theta, j, lam, w)
        sweeps += 1
        while sweeps < max_sweeps:
            step = 0.0
            for j in range(p):
                if theta[j] != 0.0:
                    step = max(step, _coord(G, grad, theta, j, lam, w))
            sweeps += 1
            if step < 1e-15:
                break
        k = _kkt(G, c, theta, lam, w)
        if k < tol:
            break
    return sweeps, k


def dss_path(X, beta_hat, lambda_grid=None, penalize_intercept: bool = True,
             tol: float = KKT_TOL, max_sweeps: int = 100_000) -> list[np.ndarray]:
    """DSS solutions along a strictly decreasing penalty grid (warm-started).

    Returns one length-(p+1) vector per grid point.
    """
    X = np.asarray(X, float)
    beta_hat = np.asarray(beta_hat, float)
    if X.ndim != 2 or beta_hat.shape != (X.shape[1],):
        raise ValidationError("beta_hat must have one entry per column of X")
    if not np.all(np.isfinite(beta_hat)):
        raise ValidationError("beta_hat must be finite")
    w = dss_weights(beta_hat, penalize_intercept)
    grid = default_grid(X, beta_hat, w) if lambda_grid is None else np.atleast_1d(
        np.asarray(lambda_grid, float))
    if np.any(grid < 0) or np.any(np.diff(grid) >= 0):
        raise ValidationError("lambda_grid must be nonnegative and strictly decreasing")
    n = X.shape[0]
    G = X.T @ X / n
    c = G @ beta_hat
    theta = np.zeros(X.shape[1])
    out = []
    for lam in grid:
        _, k = _cd(G, c, theta, float(lam), w, tol, max_sweeps)
        if not k < tol:
            raise NonConvergence(f"KKT residual {k:.3g} at lambda={lam:.4g} after {max_sweeps} sweeps")
        out.append(theta.copy())
    return out


# ---------------------------------------------------------------- cross-validation

def _beta_hat(fit):
    if isinstance(fit, VBState):
        return np.asarray(fit.mu_beta, float)
    if isinstance(fit, PosteriorDraws):
        return np.asarray(fit.arrays["beta"], float).mean(axis=0)
    if isinstance(fit, Mapping):
        return np.asarray(fit["beta_mean"], float)
    raise TypeError(f"cannot take a coefficient estimate from {type(fit).__name__}")


def dss_cv(dataset, fit, lambda_grid=None, folds: int = 5, seed: int = 0,
           penalize_intercept: bool = True) -> SelectionResult:
    """Pick the DSS penalty by K-fold CV and refit on all rows.

    The held-out loss is the squared error between X theta and X beta_hat,
    the fidelity term of the DSS objective. Among equal losses the largest
    penalty wins.
    """
    if folds < 2:
        raise ValidationError("folds must be >= 2")
    X = dataset.X
    n = X.shape[0]
    if folds > n:
        raise ValidationError(f"folds={folds} exceeds n={n}")
    beta_hat = _beta_hat(fit)
    w = dss_weights(beta_hat, penalize_intercept)
    if lambda_grid is None:
        grid = default_grid(X, beta_hat, w)
    else:
        grid = np.unique(np.asarray(lambda_grid, float))[::-1]
    perm = np.random.default_rng(seed).permutation(n)
    err = np.zeros(grid.size)
    for test in np.array_split(perm, folds):
        train = np.setdiff1d(perm, test)
        path = dss_path(X[train], beta_hat, grid, penalize_intercept)
        target = X[test] @ beta_hat
        for i, th in enumerate(path):
            r = target - X[test] @ th
            err[i] += r @ r
    err /= n
    best = int(np.flatnonzero(err <= err.min())[0])
    lam = float(grid[best])
    theta = dss_path(X, beta_hat, [lam], penalize_intercept)[0]
    return SelectionResult(scores=inclusion_probs(fit), selected=theta[1:] != 0,
                           method="dss", dss_lambda=lam, theta=theta)


def select(fit, t: float = 0.5) -> SelectionResult:
    """Threshold selection on inclusion probabilities."""
    s = inclusion_probs(fit)
    return SelectionResult(scores=s, selected=threshold_select(s, t), method="threshold")
