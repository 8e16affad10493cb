"""Synthetic regression data and co-data sources of varying informativeness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import Dataset


@dataclass(frozen=True)
class SimSpec:
    n: int
    p: int
    p0: int
    v0_sq: float = 0.5
    v_sq: float = 0.75
    bern: float = 0.4
    seed: int = 0
    task: str = "linear"

    def __post_init__(self):
        if min(self.n, self.p) < 1 or self.p0 < 0:
            raise ValidationError("n, p must be positive and p0 nonnegative")
        if self.p0 > self.p:
            raise ValidationError(f"p0={self.p0} exceeds p={self.p}")
        if self.task not in ("linear", "probit"):
            raise ValidationError(f"unknown task {self.task!r}")


@dataclass(frozen=True)
class CodataScenario:
    """How the binary co-data indicator is built.

    kind is one of ``intercept_only``, ``random`` (``k_random`` covariates
    picked uniformly from all p), ``binary`` (``k_true`` from the support and
    ``k_false`` off it) or ``perfect`` (the support indicator).
    """

    kind: str
    k_true: int = 0
    k_false: int = 0
    k_random: int = 0

    def __post_init__(self):
        if self.kind not in ("intercept_only", "random", "binary", "perfect"):
            raise ValidationError(f"unknown co-data kind {self.kind!r}")


PRESETS = {
    "main_G0": CodataScenario("intercept_only"),
    "main_G1": CodataScenario("random", k_random=100),
    "main_G2": CodataScenario("binary", k_true=20, k_false=80),
    "main_G3": CodataScenario("binary", k_true=20, k_false=10),
    "main_G4": CodataScenario("perfect"),
    "appendix_G0": CodataScenario("intercept_only"),
    "appendix_G1": CodataScenario("random", k_random=30),
    "appendix_G2": CodataScenario("binary", k_true=20, k_false=10),
    "appendix_G3": CodataScenario("perfect"),
}


def scenario(name_or_obj) -> CodataScenario:
    if isinstance(name_or_obj, CodataScenario):
        return name_or_obj
    try:
        return PRESETS[name_or_obj]
    except KeyError:
        raise ValidationError(f"unknown scenario {name_or_obj!r}; choose from {sorted(PRESETS)}")


def _rng(rng, seed):
    return np.random.default_rng(seed) if rng is None else rng


def gen_data(spec: SimSpec, rng=None):
    """Design, response and true coefficients; returns ``(Dataset, beta0)``.

    The returned dataset has no co-data. Coefficients 1..p0 are the signals.
    """
    rng = _rng(rng, spec.seed)
    n, p, p0 = spec.n, spec.p, spec.p0
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p))])
    beta = np.zeros(p + 1)
    beta[0] = np.sqrt(spec.v0_sq) * abs(rng.standard_normal())
    t = np.abs(rng.standard_normal(p0))
    sign = np.where(rng.random(p0) < spec.bern, -1.0, 1.0)
    beta[1:p0 + 1] = sign * (spec.v_sq * np.log(n) / np.sqrt(n) + np.sqrt(spec.v_sq) * t)
    latent = X @ beta + rng.standard_normal(n)
    if spec.task == "probit":
        y = (latent > 0).astype(float)
    else:
        y = latent
    return Dataset(y, X), beta


def codata_indicator(scn, true_beta, rng) -> np.ndarray | None:
    """The 0/1 co-data column (length p), or None for intercept-only."""
    scn = scenario(scn)
    signal = np.asarray(true_beta)[1:] != 0
    p = signal.size
    on, off = np.flatnonzero(signal), np.flatnonzero(~signal)
    if scn.kind == "intercept_only":
        return None
    z = np.zeros(p)
    if scn.kind == "perfect":
        z[on] = 1.0
    elif scn.kind == "random":
        if scn.k_random > p:
            raise ValidationError(f"k_random={scn.k_random} exceeds p={p}")
        z[rng.choice(p, scn.k_random, replace=False)] = 1.0
    else:
        if scn.k_true > on.size or scn.k_false > off.size:
            raise ValidationError(
                f"binary({scn.k_true}, {scn.k_false}) needs at least {scn.k_true} signals "
                f"and {scn.k_false} nulls (have {on.size}, {off.size})")
        z[rng.choice(on, scn.k_true, replace=False)] = 1.0
        z[rng.choice(off, scn.k_false, replace=False)] = 1.0
    return z


def gen_codata(scn, true_beta, rng=None) -> np.ndarray:
    """Stacked co-data matrix, intercept column first (p x 1 or p x 2)."""
    rng = _rng(rng, 0)
    z = codata_indicator(scn, true_beta, rng)
    ones = np.ones((len(true_beta) - 1, 1))
    return ones if z is None else np.column_stack([ones, z])


def simulate(spec: SimSpec, scn="main_G0", rng=None):
    """Data plus co-data in one go; returns ``(Dataset, beta0)``."""
    rng = _rng(rng, spec.seed)
    data, beta = gen_data(spec, rng)
    z = codata_indicator(scn, beta, rng)
    Z = () if z is None else (z[:, None],)
    return Dataset(data.y, data.X, Z), beta
