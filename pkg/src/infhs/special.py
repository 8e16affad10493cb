"""Scalar kernels for the local-scale factors.

The kernel family is

    f_nu(x) = x**nu * exp(-d / x**2 - b * x**2 + c * x),   x > 0,

whose stationary points solve the quartic ``2b x^4 - c x^3 - nu x^2 - 2d = 0``.
Mode finding and the integrals run item by item in compiled loops; the
public functions take scalars or arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.integrate import quad
from scipy.special import log_ndtr, ndtr

from .errors import NoPositiveRoot, QuadratureFailure

# 15-point Kronrod nodes on [0, 1] (mirrored), weights, and the embedded
# 7-point Gauss weights (Gauss nodes are xgk[1::2]).
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[1:7:2] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[9:15:2] = _WG[2::-1]

QUAD_ATOL = 1e-12
QUAD_RTOL = 1e-11
PANEL_SCHEDULE = np.array([12, 25, 50, 100])  # per side of the split; 200 at most
TAIL_CUTOFF = 1e-16
MOMENT_NUS = (-3, -1, 0, 1)
SECOND_PEAK_CUTOFF = -40.0

# weight codes understood by the compiled integrator
W_NONE, W_INCLUSION = 0, 1
# failure codes returned by the compiled routines
_OK, _NO_ROOT, _NO_BRACKET, _NO_CONVERGENCE = 0, 1, 2, 3


@dataclass(frozen=True)
class LambdaFactorParams:
    """q(lambda) proportional to lambda^-1 exp(-a/lambda^2 - b lambda^2 + c lambda)."""

    a_star: float
    b_star: float
    c_star: float


@dataclass(frozen=True)
class LambdaMoments:
    log_s: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    m_neg2: np.ndarray


def log_kernel(x, nu, d, b, c):
    return nu * np.log(x) - d / x**2 - b * x**2 + c * x


# ---------------------------------------------------------------- compiled core

@njit(cache=True)
def _lk(x, nu, d, b, c):
    return nu * np.log(x) - d / (x * x) - b * x * x + c * x


@njit(cache=True)
def _q_scaled(x, nu, d, b, c):
    # q(x) / max(x, 1)^4: same sign as q, no overflow
    s = max(x, 1.0)
    xs = x / s
    return 2 * b * xs**4 - c * xs**3 / s - nu * xs**2 / s**2 - 2 * d / s**4


@njit(cache=True)
def _root(lo, hi, nu, d, b, c, sign):
    """Root of sign*q on a bracket where it rises through zero.

    Six geometric bisections (from far away Newton on a quartic is only
    linear), then Newton with a bisection fallback whenever a step leaves
    the bracket.
    """
    for _ in range(6):
        mid = np.sqrt(lo * hi)
        if sign * _q_scaled(mid, nu, d, b, c) < 0:
            lo = mid
        else:
            hi = mid
    x = np.sqrt(lo * hi)
    for _ in range(200):
        sc = max(x, 1.0) ** 4
        q = (2 * b * x**4 - c * x**3 - nu * x * x - 2 * d) / sc
        if q == 0.0:
            return x
        dq = (8 * b * x**3 - 3 * c * x * x - 2 * nu * x) / sc
        if sign * q < 0:
            lo = x
        else:
            hi = x
        step = q / dq if dq != 0.0 else np.inf
        xn = x - step
        if not np.isfinite(xn) or xn < lo or xn > hi:
            xn = np.sqrt(lo * hi)
        elif abs(step) <= 4e-16 * x:
            return xn
        if hi - lo <= 4e-16 * hi:
            return xn
        x = xn
    return x


@njit(cache=True)
def _stationary(nu, d, b, c, maxima, minima):
    """Fill interior maxima/minima of log f (NaN padded); return the global maximiser.

    q = -x^3 d/dx log f, so maxima are where q crosses from negative to
    positive. q' vanishes at most twice on (0, inf), so its closed-form
    stationary points split the half-line into at most three monotone
    pieces, each holding at most one root.
    """
    for k in range(3):
        maxima[k] = np.nan
        minima[k] = np.nan
    if d == 0.0:
        # q = x^2 (2b x^2 - c x - nu): interior root of the quadratic factor
        if nu < 0 or (nu == 0 and c <= 0):
            return np.nan
        r = (c + np.sqrt(c * c + 8 * b * nu)) / (4 * b)
        maxima[0] = r
        return r
    anu = abs(nu)
    lower = 1.0 / (1.0 + max(abs(c), anu, 2 * b) / (2 * d))
    upper = 1.0 + max(abs(c), anu, 2 * d) / (2 * b)
    pts = np.empty(4)
    pts[0] = lower
    m = 1
    # roots of 8b x^2 - 3c x - 2nu, stable form
    A, B, C = 8 * b, -3 * c, -2.0 * nu
    disc = B * B - 4 * A * C
    if disc >= 0:
        sq = np.sqrt(disc)
        qq = -0.5 * (B + (sq if B >= 0 else -sq))
        r1 = qq / A
        r2 = C / qq if qq != 0 else np.nan
        lo_r, hi_r = min(r1, r2), max(r1, r2)
        if not np.isfinite(lo_r):
            lo_r, hi_r = hi_r, np.nan
        for r in (lo_r, hi_r):
            if np.isfinite(r) and r > lower and r < upper:
                pts[m] = r
                m += 1
    pts[m] = upper
    m += 1
    best, best_lf = np.nan, -np.inf
    for k in range(m - 1):
        lo, hi = pts[k], pts[k + 1]
        qlo, qhi = _q_scaled(lo, nu, d, b, c), _q_scaled(hi, nu, d, b, c)
        if qlo < 0 and qhi >= 0:
            x = _root(lo, hi, nu, d, b, c, 1.0)
            maxima[k] = x
            lf = _lk(x, nu, d, b, c)
            if lf > best_lf:
                best, best_lf = x, lf
        elif qlo > 0 and qhi <= 0:
            minima[k] = _root(lo, hi, nu, d, b, c, -1.0)
    return best


@njit(cache=True)
def _modes(nu, d, b, c):
    """Global maximisers. For very small d the mode sits near sqrt(2d), where
    x^4 underflows; x = s y with s = sqrt(d) maps the kernel to the same
    family with (d, b, c) -> (1, b d, c sqrt(d)), solved at unit scale."""
    n = d.size
    out = np.empty(n)
    mx, mn = np.empty(3), np.empty(3)
    for i in range(n):
        if 0.0 < d[i] < 1e-100:
            s = np.sqrt(d[i])
            out[i] = s * _stationary(nu, 1.0, b[i] * d[i], c[i] * s, mx, mn)
        else:
            out[i] = _stationary(nu, d[i], b[i], c[i], mx, mn)
    return out


@njit(cache=True)
def _rescaled(u, nu, d, b, c, xm, lfm, wcode):
    # f(xm e^u) xm e^u / (f(xm) xm) without forming log x
    e = np.exp(u)
    r = (nu + 1) * u - d / (xm * xm) * (1.0 / (e * e) - 1.0) \
        - b * xm * xm * (e * e - 1.0) + c * xm * (e - 1.0)
    v = np.exp(r)
    if not np.isfinite(v):
        return 0.0
    if wcode == W_INCLUSION:
        x = xm * e
        v *= x * x / (1.0 + x * x)
    return v


@njit(cache=True)
def _gk(lo, hi, centre, scale, npan, nu, d, b, c, xm, lfm, wcode, xk, wk, wg):
    """Composite G7/K15 on the mesh u = centre + scale sinh(t), uniform in t."""
    tlo = np.arcsinh((lo - centre) / scale)
    thi = np.arcsinh((hi - centre) / scale)
    h = (thi - tlo) / npan
    est, err = 0.0, 0.0
    for k in range(npan):
        mid = tlo + h * (k + 0.5)
        sk, sg = 0.0, 0.0
        for i in range(15):
            et = np.exp(mid + 0.5 * h * xk[i])
            u = centre + scale * 0.5 * (et - 1.0 / et)
            g = _rescaled(u, nu, d, b, c, xm, lfm, wcode) * scale * 0.5 * (et + 1.0 / et)
            sk += wk[i] * g
            sg += wg[i] * g
        est += 0.5 * h * sk
        err += abs(0.5 * h * (sk - sg))
    return est, err


@njit(cache=True)
def _u_scale(x, nu, d, b):
    # 1/sqrt(curvature) of log f(x e^u) + u in u, at a maximiser x of log f
    curv = nu + 6 * d / (x * x) + 2 * b * x * x
    return 1.0 / np.sqrt(max(curv, 1e-3))


@njit(cache=True)
def _integrate(nu, d, b, c, wcode, xk, wk, wg, schedule, atol, rtol, tail):
    """log int_0^inf w(x) f_nu(x) dx per item, plus a status code per item."""
    n = d.size
    out = np.full(n, np.nan)
    status = np.zeros(n, dtype=np.int64)
    mx, mn = np.empty(3), np.empty(3)
    for i in range(n):
        di, bi, ci = d[i], b[i], c[i]
        xm = _stationary(nu, di, bi, ci, mx, mn)
        if not (xm > 0):
            status[i] = _NO_ROOT
            continue
        lfm = _lk(xm, nu, di, bi, ci)
        # the most prominent other peak, measured in u = log(x / xm)
        u2, h2 = 0.0, -np.inf
        for k in range(3):
            if np.isfinite(mx[k]):
                uk = np.log(mx[k] / xm)
                if abs(uk) > 1e-9:
                    hk = _lk(mx[k], nu, di, bi, ci) + uk - lfm
                    if hk > h2:
                        u2, h2 = uk, hk
        if h2 <= SECOND_PEAK_CUTOFF:
            u2 = 0.0
        cl, cr = min(0.0, u2), max(0.0, u2)
        split = 0.5 * u2
        if u2 != 0.0:
            best = -np.inf
            for k in range(3):
                if np.isfinite(mn[k]):
                    uk = np.log(mn[k] / xm)
                    if uk > cl and uk < cr and uk > best:
                        best = uk
            if np.isfinite(best):
                split = best
        lo = min(-np.log(10.0), cl - 2.0)
        hi = max(np.log(10.0), cr + 2.0)
        ok = True
        for _ in range(13):
            if _rescaled(lo, nu, di, bi, ci, xm, lfm, W_NONE) < tail:
                break
            lo *= 2
        else:
            ok = False
        for _ in range(13):
            if _rescaled(hi, nu, di, bi, ci, xm, lfm, W_NONE) < tail:
                break
            hi *= 2
        else:
            ok = False
        if not ok:
            status[i] = _NO_BRACKET
            continue
        s_main = _u_scale(xm, nu, di, bi)
        s_other = _u_scale(xm * np.exp(u2), nu, di, bi)
        sl = s_other if u2 < 0 else s_main
        sr = s_other if u2 > 0 else s_main
        status[i] = _NO_CONVERGENCE
        for npan in schedule:
            e1, r1 = _gk(lo, split, cl, sl, npan, nu, di, bi, ci, xm, lfm, wcode, xk, wk, wg)
            e2, r2 = _gk(split, hi, cr, sr, npan, nu, di, bi, ci, xm, lfm, wcode, xk, wk, wg)
            est = e1 + e2
            if r1 + r2 <= max(atol, rtol * abs(est)):
                if est > 0:
                    out[i] = lfm + np.log(xm) + np.log(est)
                    status[i] = _OK
                break
    return out, status


# ---------------------------------------------------------------- public API

def _flat(d, b, c):
    shape = np.broadcast(np.asarray(d), np.asarray(b), np.asarray(c)).shape
    d, b, c = (np.ascontiguousarray(np.broadcast_to(np.asarray(v, float), shape).ravel())
               for v in (d, b, c))
    if np.any(~(b > 0)) or np.any(~(d >= 0)):
        raise NoPositiveRoot("need b > 0 and d >= 0")
    return shape, d, b, c


def _check_nu(nu):
    if nu not in MOMENT_NUS:
        raise ValueError(f"nu must be one of {MOMENT_NUS}")
    return float(nu)


def quartic_mode(nu, d, b, c):
    """Maximiser of ``x**nu * exp(-d/x**2 - b*x**2 + c*x)`` over x > 0.

    It is the positive root of ``2b x^4 - c x^3 - nu x^2 - 2d`` with the
    largest kernel value. Roots are bracketed between the closed-form
    stationary points of the quartic, then found by bisection followed by
    safeguarded Newton steps. Accepts scalars or arrays (broadcast).
    """
    nu = _check_nu(nu)
    shape, d, b, c = _flat(d, b, c)
    mode = _modes(nu, d, b, c)
    if np.any(~(mode > 0)):
        raise NoPositiveRoot("integrand has no interior maximum")
    return float(mode[0]) if shape == () else mode.reshape(shape)


def stationary_points(nu, d, b, c):
    """Local maximisers and minimisers of the scalar kernel (NaN padded to 3)."""
    mx, mn = np.empty(3), np.empty(3)
    _stationary(_check_nu(nu), float(d), float(b), float(c), mx, mn)
    return mx[np.isfinite(mx)], mn[np.isfinite(mn)]


def log_kernel_integral(nu, d, b, c, weight=None):
    """log of ``int_0^inf w(x) f_nu(x) dx`` for arrays of (d, b, c).

    The integrand is divided by its value at the mode (so nothing
    overflows), mapped to ``u = log(x / mode)`` and bracketed by doubling
    until both tails drop below 1e-16. Composite Gauss-Kronrod then runs on a
    mesh graded around each significant local maximum, refined until the
    Kronrod-Gauss discrepancy is small. ``weight`` may be None,
    ``"inclusion"`` for x^2/(1+x^2), or any bounded positive callable (slow
    path through scipy's adaptive quad).
    """
    nu = _check_nu(nu)
    shape, d, b, c = _flat(d, b, c)
    if callable(weight):
        out = _quad_fallback(nu, d, b, c, weight)
    else:
        code = {None: W_NONE, "inclusion": W_INCLUSION}.get(weight)
        if code is None:
            raise ValueError(f"unknown weight {weight!r}")
        out, status = _integrate(nu, d, b, c, code, KRONROD_NODES, KRONROD_WEIGHTS,
                                 GAUSS_WEIGHTS, PANEL_SCHEDULE, QUAD_ATOL, QUAD_RTOL,
                                 TAIL_CUTOFF)
        if np.any(status == _NO_ROOT):
            raise NoPositiveRoot("integrand has no interior maximum")
        if np.any(status == _NO_BRACKET):
            raise QuadratureFailure("could not bracket the integrand tails")
        if np.any(status != _OK):
            raise QuadratureFailure(
                f"Gauss-Kronrod failed to converge for {int(np.sum(status != _OK))} item(s) "
                f"within {2 * PANEL_SCHEDULE[-1]} subdivisions")
    return float(out[0]) if shape == () else out.reshape(shape)


def _quad_fallback(nu, d, b, c, weight):
    modes = _modes(nu, d, b, c)
    out = np.empty(d.size)
    for i, xm in enumerate(modes):
        lfm = _lk(xm, nu, d[i], b[i], c[i])

        def g(u, i=i, xm=xm, lfm=lfm):
            lx = np.log(xm) + u
            with np.errstate(over="ignore"):
                lf = (nu + 1) * lx - d[i] * np.exp(-2 * lx) - b[i] * np.exp(2 * lx) + c[i] * np.exp(lx)
            if not np.isfinite(lf) or lf - lfm - np.log(xm) < -745:
                return 0.0
            return np.exp(lf - lfm - np.log(xm)) * weight(np.exp(lx))

        val = sum(quad(g, a, z, epsabs=0, epsrel=1e-11, limit=200)[0]
                  for a, z in ((-np.inf, -1.0), (-1.0, 1.0), (1.0, np.inf)))
        if not val > 0:
            raise QuadratureFailure("non-positive integral estimate")
        out[i] = lfm + np.log(xm) + np.log(val)
    return out


def lambda_moments(a_star, b_star=None, c_star=None) -> LambdaMoments:
    """Log normaliser and moments E[x], E[x^2], E[x^-2] of the density
    proportional to ``x^-1 exp(-a/x^2 - b x^2 + c x)``.

    Accepts a :class:`LambdaFactorParams` or three scalars/arrays.
    """
    if isinstance(a_star, LambdaFactorParams):
        a_star, b_star, c_star = a_star.a_star, a_star.b_star, a_star.c_star
    a = np.asarray(a_star, float)
    if np.any(~(a > 0)):
        raise NoPositiveRoot("a_star must be positive")
    logs = {nu: log_kernel_integral(nu, a_star, b_star, c_star) for nu in MOMENT_NUS}
    log_s = logs[-1]
    return LambdaMoments(
        log_s=log_s,
        m1=np.exp(logs[0] - log_s),
        m2=np.exp(logs[1] - log_s),
        m_neg2=np.exp(logs[-3] - log_s),
    )


def lambda_expectation(func, a_star, b_star, c_star, log_s=None):
    """E[func(lambda)] under the lambda factor.

    ``func`` is ``"inclusion"`` (lambda^2/(1+lambda^2)) or a bounded
    positive callable.
    """
    if log_s is None:
        log_s = log_kernel_integral(-1, a_star, b_star, c_star)
    return np.exp(log_kernel_integral(-1, a_star, b_star, c_star, weight=func) - log_s)


def _log_mills(mu):
    """log(phi(mu) / Phi(mu)), stable for very negative mu."""
    return -0.5 * mu**2 - 0.5 * np.log(2 * np.pi) - log_ndtr(mu)


def trunc_normal_mean(mu, side):
    """Mean of N(mu, 1) truncated to w > 0 (``right_of_zero``) or w < 0
    (``left_of_zero``)."""
    mu = np.asarray(mu, float)
    if side in ("right_of_zero", "positive", 1, True):
        out = mu + np.exp(_log_mills(mu))
    elif side in ("left_of_zero", "negative", 0, False):
        out = mu - np.exp(_log_mills(-mu))
    else:
        raise ValueError(f"unknown side {side!r}")
    return float(out) if out.ndim == 0 else out


def normal_positive_mass(mu, var):
    """P(N(mu, var) > 0)."""
    out = ndtr(np.asarray(mu, float) / np.sqrt(var))
    return float(out) if np.ndim(out) == 0 else out


def log_normal_positive_mass(mu, var):
    out = log_ndtr(np.asarray(mu, float) / np.sqrt(var))
    return float(out) if np.ndim(out) == 0 else out
