"""Exact sampler for the local-scale full conditional

    pi(x) ~ x^-1 exp(-psi/x^2 - alpha^2 x^2 + beta x),   x > 0,

by rejection from the G3p law g(x) ~ x^gamma exp(-alpha^2 x^2 + beta x),
whose integer shape gamma is chosen so that f and g peak at the same point.

G3p draws themselves come from rejection under a piecewise-exponential
envelope: log g is concave, so tangent lines at three abscissae around its
mode bound it from above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AcceptanceStall
from .special import quartic_mode

PSI_FLOOR = 1e-300
MAX_PROPOSALS = 1_000_000
_MAX_BATCH = 1 << 16
_MAX_CELLS = 1 << 22


@dataclass(frozen=True)
class LambdaFullConditionalParams:
    psi: float
    alpha_sq: float
    beta_lin: float


def _unpack(params, alpha_sq=None, beta_lin=None):
    if isinstance(params, LambdaFullConditionalParams):
        return params.psi, params.alpha_sq, params.beta_lin
    return params, alpha_sq, beta_lin


def choose_gamma(params, alpha_sq=None, beta_lin=None):
    """Integer G3p shape matching the mode of the full conditional.

    With x_max the mode of pi, the G3p mode coincides with it when
    gamma = x_max (2 alpha^2 x_max - beta). The value is rounded to the
    nearest integer and clamped at zero. Works elementwise on arrays.
    """
    psi, a2, b = _unpack(params, alpha_sq, beta_lin)
    psi = np.maximum(np.asarray(psi, float), PSI_FLOOR)
    x = quartic_mode(-1, psi, a2, b)
    g = np.floor(x * (2 * np.asarray(a2) * x - np.asarray(b)) + 0.5)
    g = np.maximum(g, 0.0)
    return int(g) if np.ndim(g) == 0 else g.astype(np.int64)


def log_accept(x, psi, gamma):
    """log of the outer acceptance probability; equals 0 at x = sqrt(2 psi/(gamma+1))."""
    psi = np.maximum(psi, PSI_FLOOR)
    g1 = np.asarray(gamma, float) + 1.0
    log_xdot = 0.5 * (np.log(2 * psi) - np.log(g1))
    return -g1 * (np.log(x) - log_xdot) + 0.5 * g1 - psi / x**2


# ---------------------------------------------------------------- G3p envelope

def _g3p_logd(x, gamma, a2, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.where(gamma > 0, gamma * np.log(x), 0.0)
    return lx - a2 * x**2 + b * x


def _g3p_dlogd(x, gamma, a2, b):
    return gamma / x - 2 * a2 * x + b


class _Hull:
    """Tangent envelope for a batch of G3p targets (one row per item)."""

    def __init__(self, gamma, a2, b):
        gamma = np.asarray(gamma, float)
        a2, b = np.asarray(a2, float), np.asarray(b, float)
        self.gamma, self.a2, self.b = gamma, a2, b
        interior = gamma > 0
        with np.errstate(invalid="ignore"):
            m_int = (b + np.sqrt(b**2 + 8 * a2 * gamma)) / (4 * a2)
        m = np.where(interior, m_int, np.maximum(b / (2 * a2), 0.0))
        with np.errstate(divide="ignore"):
            curv = np.where(interior, gamma / np.where(interior, m, 1.0) ** 2, 0.0) + 2 * a2
        s = 1.0 / np.sqrt(curv)
        left = np.where(m - s > 0, m - s, 0.5 * m)
        boundary = m <= 0
        t = np.stack([np.where(boundary, 0.5 * s, left),
                      np.where(boundary, s, m),
                      np.where(boundary, 2 * s, m + s)], axis=1)
        h = _g3p_logd(t, gamma[:, None], a2[:, None], b[:, None])
        dh = _g3p_dlogd(t, gamma[:, None], a2[:, None], b[:, None])
        # intersections of consecutive tangents
        z = (h[:, 1:] - h[:, :-1] - t[:, 1:] * dh[:, 1:] + t[:, :-1] * dh[:, :-1]) / (
            dh[:, :-1] - dh[:, 1:])
        n = len(gamma)
        self.L = np.column_stack([np.zeros(n), z])
        self.R = np.column_stack([z, np.full(n, np.inf)])
        self.t, self.h, self.dh = t, h, dh
        w = self.R - self.L
        a = np.abs(dh)
        with np.errstate(over="ignore", invalid="ignore"):
            top = np.maximum(self._line(self.L), np.where(np.isinf(w), -np.inf, self._line(self.R)))
            frac = np.where(a > 0, -np.expm1(-a * w) / np.where(a > 0, a, 1.0), w)
        logm = top + np.log(frac)
        self.cum = np.cumsum(np.exp(logm - logm.max(axis=1, keepdims=True)), axis=1)

    def _line(self, x, rows=slice(None)):
        return self.h[rows] + self.dh[rows] * (x - self.t[rows])

    def propose(self, rows, k, rng):
        """k envelope candidates per row, plus the log inner acceptance ratio."""
        cum = self.cum[rows]
        u = rng.random((len(rows), k)) * cum[:, -1:]
        seg = (u[:, :, None] > cum[:, None, :]).sum(axis=2)
        r = rows[:, None]
        L, R, dh = self.L[r, seg], self.R[r, seg], self.dh[r, seg]
        w = R - L
        a = np.abs(dh)
        v = rng.random((len(rows), k))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            e = -np.log1p(-v * -np.expm1(-a * w)) / a
            x = np.where(a == 0, L + v * w, np.where(dh < 0, L + e, R - e))
        x = np.maximum(x, np.finfo(float).tiny)
        t, h = self.t[r, seg], self.h[r, seg]
        g, a2, b = self.gamma[rows, None], self.a2[rows, None], self.b[rows, None]
        log_ratio = _g3p_logd(x, g, a2, b) - (h + dh * (x - t))
        return x, np.minimum(log_ratio, 0.0)


def sample_g3p(gamma, alpha_sq, beta_lin, rng, size=None):
    """Draws from the density proportional to x^gamma exp(-alpha_sq x^2 + beta_lin x).

    Scalar parameters with ``size=None`` give one float; otherwise the
    parameters are broadcast to ``size`` (or to each other) and an array of
    independent draws is returned.
    """
    gamma, a2, b = np.broadcast_arrays(np.asarray(gamma, float), np.asarray(alpha_sq, float),
                                       np.asarray(beta_lin, float))
    shape = gamma.shape if size is None else np.broadcast_shapes(gamma.shape, tuple(np.atleast_1d(size)))
    gamma, a2, b = (np.broadcast_to(v, shape).ravel() for v in (gamma, a2, b))
    if np.any(gamma < 0) or np.any(~(a2 > 0)):
        raise ValueError("need gamma >= 0 and alpha_sq > 0")
    hull = _Hull(gamma, a2, b)
    out = np.empty(gamma.size)
    todo = np.arange(gamma.size)
    k = 2
    while todo.size:
        x, lr = hull.propose(todo, k, rng)
        ok = np.log(rng.random(x.shape)) < lr
        hit = ok.any(axis=1)
        first = ok.argmax(axis=1)
        out[todo[hit]] = x[hit, first[hit]]
        todo = todo[~hit]
        k = min(2 * k, _MAX_BATCH)
    return float(out[0]) if shape == () else out.reshape(shape)


# ---------------------------------------------------------------- full conditional

def sample_lambda_block(psi, alpha_sq, beta_lin, rng, max_proposals=MAX_PROPOSALS):
    """Vectorised rejection sampler for many independent full conditionals.

    Returns ``(draws, proposals_used, stalled)``. Items that exceed
    ``max_proposals`` G3p proposals are flagged in ``stalled`` and left as NaN.
    """
    psi = np.maximum(np.asarray(psi, float).ravel(), PSI_FLOOR)
    a2 = np.broadcast_to(np.asarray(alpha_sq, float), psi.shape).ravel()
    b = np.broadcast_to(np.asarray(beta_lin, float), psi.shape).ravel()
    gamma = np.asarray(choose_gamma(psi, a2, b), float).reshape(psi.shape)
    hull = _Hull(gamma, a2, b)
    n = psi.size
    out = np.full(n, np.nan)
    used = np.zeros(n, dtype=np.int64)
    todo = np.arange(n)
    k = 4
    while todo.size:
        x, lr = hull.propose(todo, k, rng)
        u = rng.random((2,) + x.shape)
        inner = np.log(u[0]) < lr
        outer = inner & (np.log(u[1]) < log_accept(x, psi[todo, None], gamma[todo, None]))
        hit = outer.any(axis=1)
        first = outer.argmax(axis=1)
        counted = np.cumsum(inner, axis=1)
        used[todo] += np.where(hit, counted[np.arange(todo.size), first], counted[:, -1])
        out[todo[hit]] = x[hit, first[hit]]
        todo = todo[~hit]
        stalled_now = used[todo] > max_proposals
        todo = todo[~stalled_now]
        if todo.size:
            k = int(min(2 * k, _MAX_BATCH, max(1, _MAX_CELLS // todo.size)))
    stalled = np.isnan(out)
    return out, used, stalled


def sample_lambda_fc(params, rng, alpha_sq=None, beta_lin=None, max_proposals=MAX_PROPOSALS):
    """One exact draw of lambda_j and the number of G3p proposals it took.

    Raises :class:`AcceptanceStall` past ``max_proposals`` proposals.
    """
    psi, a2, b = _unpack(params, alpha_sq, beta_lin)
    x, used, stalled = sample_lambda_block([psi], a2, b, rng, max_proposals)
    if stalled[0]:
        raise AcceptanceStall(f"no acceptance after {used[0]} proposals", int(used[0]))
    return float(x[0]), int(used[0])


def slice_update_lambda(lam, psi, alpha_sq, beta_lin, rng, width=1.0, max_steps=64):
    """One stepping-out slice update of log(lambda), leaving pi invariant.

    Used when rejection sampling stalls; a valid MCMC move, not an
    independent draw.
    """
    psi = max(psi, PSI_FLOOR)

    def logp(u):
        e = np.exp(u)
        return -psi / e**2 - alpha_sq * e**2 + beta_lin * e

    u0 = float(np.log(lam))
    level = logp(u0) + np.log(rng.random())
    lo = u0 - width * rng.random()
    hi = lo + width
    j = int(rng.integers(max_steps))
    kk = max_steps - 1 - j
    while j > 0 and logp(lo) > level:
        lo -= width
        j -= 1
    while kk > 0 and logp(hi) > level:
        hi += width
        kk -= 1
    while True:
        u = lo + (hi - lo) * rng.random()
        if logp(u) > level:
            return float(np.exp(u))
        if u < u0:
            lo = u
        else:
            hi = u
