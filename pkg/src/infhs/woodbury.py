"""Gaussian computations with precision X'X + diag(delta), done through the
n x n matrix A = I_n + X diag(1/delta) X' so that cost stays linear in p."""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from .errors import SingularSystem


def _check_delta(delta):
    delta = np.asarray(delta, float)
    if not np.all(delta > 0) or not np.all(np.isfinite(delta)):
        raise SingularSystem("delta must be finite and strictly positive")
    return delta


class WoodburyFactor:
    """Cholesky of ``I_n + X D^-1 X'`` with ``D = diag(delta)``, reused by all
    the Woodbury quantities for one (X, delta) pair."""

    def __init__(self, X, delta):
        self.X = np.asarray(X, float)
        self.delta = _check_delta(delta)
        self.dinv = 1.0 / self.delta
        self.V = self.dinv[:, None] * self.X.T  # D^-1 X', (p+1) x n
        A = self.X @ self.V
        A[np.diag_indices_from(A)] += 1.0
        try:
            self.cho = cho_factor(A, lower=True, check_finite=True)
        except (LinAlgError, ValueError) as exc:
            raise SingularSystem(f"Cholesky of I + X D^-1 X' failed: {exc}") from exc

    def solve_n(self, r):
        return cho_solve(self.cho, r, check_finite=False)

    def diag(self):
        """diag((X'X + D)^-1)."""
        W = solve_triangular(self.cho[0], self.V.T, lower=True, check_finite=False)
        return self.dinv - np.einsum("ij,ij->j", W, W)

    def mean(self, rhs):
        """(X'X + D)^-1 rhs, with matrix-vector products only."""
        a = self.dinv * np.asarray(rhs, float)
        return a - self.V @ self.solve_n(self.X @ a)

    def trace_xsx(self):
        """tr(X (X'X + D)^-1 X') = n - tr(A^-1)."""
        L = self.cho[0]
        Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)
        return max(L.shape[0] - float(np.sum(Linv**2)), 0.0)

    def logdet(self):
        """log|(X'X + D)^-1| = -sum log delta - log|A|."""
        return float(-np.sum(np.log(self.delta)) - 2 * np.sum(np.log(np.diag(self.cho[0]))))


def woodbury_diag(X, delta):
    return WoodburyFactor(X, delta).diag()


def woodbury_mean(X, delta, rhs):
    return WoodburyFactor(X, delta).mean(rhs)


def trace_xsx(X, delta):
    return WoodburyFactor(X, delta).trace_xsx()


def woodbury_logdet(X, delta):
    return WoodburyFactor(X, delta).logdet()


def sample_beta_fc(X, y, delta, sigma_sq, rng, method="auto"):
    """One draw from N(S X'y, sigma_sq S), S = (X'X + diag(delta))^-1.

    ``method='auto'`` uses a dense Cholesky of the precision when
    p + 1 <= 2n and the O(n^2 p) auxiliary-variable scheme otherwise; both
    can be forced with ``'dense'`` / ``'fast'``.
    """
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    delta = _check_delta(delta)
    n, k = X.shape
    if method == "auto":
        method = "dense" if k <= 2 * n else "fast"
    sd = np.sqrt(sigma_sq)
    if method == "dense":
        P = X.T @ X
        P[np.diag_indices_from(P)] += delta
        try:
            c = cho_factor(P, lower=True)
        except (LinAlgError, ValueError) as exc:
            raise SingularSystem(f"Cholesky of the precision failed: {exc}") from exc
        m = cho_solve(c, X.T @ y, check_finite=False)
        z = rng.standard_normal(k)
        return m + sd * solve_triangular(c[0].T, z, lower=False, check_finite=False)
    if method != "fast":
        raise ValueError(f"unknown method {method!r}")
    # scaled problem: Phi = X / sigma, prior covariance sigma^2 D^-1, response y / sigma
    fac = WoodburyFactor(X, delta)
    u = sd * np.sqrt(fac.dinv) * rng.standard_normal(k)
    v = X @ u / sd + rng.standard_normal(n)
    w = fac.solve_n(y / sd - v)
    return u + sd * (fac.V @ w)
