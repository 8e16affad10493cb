"""Gibbs sampler for the linear model with co-data-informed local scales."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalOverflow, UnsupportedCombination
from .g3p import PSI_FLOOR, sample_lambda_block, slice_update_lambda
from .model import STATE_FIELDS, Dataset, GibbsState, Hyperparameters, PosteriorDraws, validate
from .woodbury import sample_beta_fc


@dataclass(frozen=True)
class GibbsConfig:
    """Run length and diagnostics.

    ``fixed`` names state fields that are never updated (their values come
    from ``init``); it exists for validation runs such as sampling beta with
    every scale frozen, or pinning gamma at zero.
    """

    B: int = 5000
    bn: int = 2500
    seed: int = 0
    thin: int = 1
    fixed: frozenset = field(default_factory=frozenset)
    init: GibbsState | None = None

    def __post_init__(self):
        object.__setattr__(self, "fixed", frozenset(self.fixed))
        if not (0 <= self.bn < self.B):
            raise ValueError("need 0 <= bn < B")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        unknown = self.fixed - set(STATE_FIELDS)
        if unknown:
            raise ValueError(f"unknown state fields {sorted(unknown)}")


def inv_gamma(rng, shape, rate):
    """IG(shape, rate) draws, i.e. rate / Gamma(shape, 1)."""
    return np.asarray(rate) / rng.gamma(shape)


class GibbsSampler:
    """One-step transition kernel; ``run_gibbs`` drives it."""

    def __init__(self, dataset: Dataset, hyper: Hyperparameters, fixed=frozenset()):
        self.X = dataset.X
        self.y = dataset.y
        self.Z = dataset.stacked_codata()
        self.sizes = np.asarray(dataset.source_sizes)
        self.src = dataset.source_index()
        self.hyper = hyper
        self.n, self.p = dataset.n, dataset.p
        self.fixed = frozenset(fixed)
        self.fallbacks = 0

    def initial_state(self, rng) -> GibbsState:
        h = self.hyper
        return GibbsState(
            beta=np.zeros(self.p + 1),
            sigma_sq=1.0,
            tau_sq=1.0,
            zeta=float(inv_gamma(rng, 0.5, 1.0)),
            lambda0_sq=1.0,
            psi0=float(inv_gamma(rng, 0.5, 1.0)),
            lam=np.ones(self.p),
            phi_sq=inv_gamma(rng, np.full(self.p, 0.5), 0.5),
            gamma=np.zeros(self.Z.shape[1]),
            kappa_sq=inv_gamma(rng, h.a_arr, h.b_arr),
        )

    def step(self, s: GibbsState, rng, y=None) -> GibbsState:
        """Apply one sweep in place and return the state."""
        y = self.y if y is None else y
        X, Z, h, fx = self.X, self.Z, self.hyper, self.fixed
        n, p, s0 = self.n, self.p, h.s0_sq

        lam_all = np.concatenate([[np.sqrt(s.lambda0_sq)], s.lam])
        if "beta" not in fx:
            delta = 1.0 / (s.tau_sq * lam_all**2)
            s.beta = sample_beta_fc(X, y, delta, s.sigma_sq, rng)
        b2 = s.beta**2
        st = s.sigma_sq * s.tau_sq

        if "lambda0_sq" not in fx:
            s.lambda0_sq = float(inv_gamma(rng, 1.0, 1.0 / s.psi0 + b2[0] / (2 * st)))
        if "psi0" not in fx:
            s.psi0 = float(inv_gamma(rng, 1.0, 1.0 + 1.0 / s.lambda0_sq))

        mu = Z @ s.gamma
        if "lam" not in fx:
            psi = np.maximum(b2[1:] / (2 * st), PSI_FLOOR)
            a2 = 1.0 / (2 * s0 * s.phi_sq)
            bl = mu / (s0 * s.phi_sq)
            lam, _, stalled = sample_lambda_block(psi, a2, bl, rng)
            for j in np.flatnonzero(stalled):
                lam[j] = slice_update_lambda(s.lam[j], psi[j], a2[j], bl[j], rng)
            self.fallbacks += int(stalled.sum())
            s.lam = lam
        if "phi_sq" not in fx:
            s.phi_sq = inv_gamma(rng, np.ones(p), 0.5 + (s.lam - mu) ** 2 / (2 * s0))

        if "gamma" not in fx:
            w = 1.0 / s.phi_sq
            P = Z.T @ (w[:, None] * Z)
            P[np.diag_indices_from(P)] += s0 / s.kappa_sq[self.src]
            L = np.linalg.cholesky(P)
            m = np.linalg.solve(P, Z.T @ (w * s.lam))
            s.gamma = m + np.sqrt(s0) * np.linalg.solve(L.T, rng.standard_normal(len(m)))
        if "kappa_sq" not in fx:
            ss = np.bincount(self.src, weights=s.gamma**2, minlength=len(self.sizes))
            s.kappa_sq = inv_gamma(rng, h.a_arr + self.sizes / 2, h.b_arr + ss / 2)

        lam_all = np.concatenate([[np.sqrt(s.lambda0_sq)], s.lam])
        quad = float(np.sum(b2 / lam_all**2))
        if "tau_sq" not in fx:
            s.tau_sq = float(inv_gamma(rng, p / 2 + 1, 1.0 / s.zeta + quad / (2 * s.sigma_sq)))
        if "zeta" not in fx:
            s.zeta = float(inv_gamma(rng, 1.0, 1.0 + 1.0 / s.tau_sq))
        if "sigma_sq" not in fx:
            r = y - X @ s.beta
            s.sigma_sq = float(inv_gamma(rng, h.v + (n + p + 1) / 2,
                                         h.q + r @ r / 2 + quad / (2 * s.tau_sq)))
        return s


def sample_prior(dataset: Dataset, hyper: Hyperparameters, rng, max_tries=100_000) -> GibbsState:
    """One exact draw from the joint prior of all parameters.

    The local-scale prior is an unnormalised truncated normal, so the joint
    density of (gamma, phi) carries the extra factor prod_j Phi(mu_j / sd_j).
    Since that factor is at most one, drawing from the untilted prior and
    accepting with that probability is exact.
    """
    from scipy.special import log_ndtr
    from scipy.stats import truncnorm

    Z = dataset.stacked_codata()
    src = dataset.source_index()
    p, s0 = dataset.p, hyper.s0_sq
    for _ in range(max_tries):
        kappa_sq = inv_gamma(rng, hyper.a_arr, hyper.b_arr)
        gamma = rng.standard_normal(Z.shape[1]) * np.sqrt(kappa_sq[src])
        phi_sq = inv_gamma(rng, np.full(p, 0.5), 0.5)
        mu, sd = Z @ gamma, np.sqrt(s0 * phi_sq)
        if np.log(rng.random()) < np.sum(log_ndtr(mu / sd)):
            break
    else:
        raise NumericalOverflow(f"prior rejection sampler failed after {max_tries} tries")
    lam = truncnorm.rvs(-mu / sd, np.inf, loc=mu, scale=sd, random_state=rng)
    zeta = float(inv_gamma(rng, 0.5, 1.0))
    tau_sq = float(inv_gamma(rng, 0.5, 1.0 / zeta))
    psi0 = float(inv_gamma(rng, 0.5, 1.0))
    lambda0_sq = float(inv_gamma(rng, 0.5, 1.0 / psi0))
    sigma_sq = float(inv_gamma(rng, hyper.v, hyper.q))
    sd_beta = np.sqrt(sigma_sq * tau_sq) * np.concatenate([[np.sqrt(lambda0_sq)], lam])
    return GibbsState(beta=sd_beta * rng.standard_normal(p + 1), sigma_sq=sigma_sq,
                      tau_sq=tau_sq, zeta=zeta, lambda0_sq=lambda0_sq, psi0=psi0, lam=lam,
                      phi_sq=phi_sq, gamma=gamma, kappa_sq=kappa_sq)


def _finite(s: GibbsState) -> bool:
    return all(np.all(np.isfinite(getattr(s, k))) for k in STATE_FIELDS) and s.is_positive()


def run_gibbs(dataset: Dataset, hyper: Hyperparameters, config: GibbsConfig = GibbsConfig(),
              rng=None) -> PosteriorDraws:
    """Run the chain for ``config.B`` sweeps and keep every ``thin``-th draw after ``bn``.

    ``rng`` defaults to a generator seeded with ``config.seed``.
    """
    validate(dataset, hyper, "linear")
    if dataset.M > 10 * dataset.n:
        raise UnsupportedCombination(f"M={dataset.M} co-data columns exceeds 10 n")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    sampler = GibbsSampler(dataset, hyper, config.fixed)
    state = sampler.initial_state(rng)
    if config.init is not None:
        state = config.init.copy()
    keep = []
    for it in range(1, config.B + 1):
        state = sampler.step(state, rng)
        if not _finite(state):
            raise NumericalOverflow(f"non-finite or non-positive state at iteration {it}", it)
        if it > config.bn and (it - config.bn) % config.thin == 0:
            keep.append(state.copy())
    meta = dict(B=config.B, bn=config.bn, seed=config.seed, thin=config.thin,
                slice_fallbacks=sampler.fallbacks)
    return PosteriorDraws.from_states(keep, meta)


@dataclass
class FitSummary:
    beta_mean: np.ndarray
    beta_sd: np.ndarray
    beta_q025: np.ndarray
    beta_q50: np.ndarray
    beta_q975: np.ndarray
    sigma_sq_mean: float
    tau_sq_mean: float
    gamma_mean: np.ndarray
    kappa_sq_mean: np.ndarray
    inclusion: np.ndarray

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in vars(self).items()}


def summarize(draws: PosteriorDraws) -> FitSummary:
    if len(draws) == 0:
        raise ValueError("no retained draws")
    B = draws.arrays["beta"]
    q = np.quantile(B, [0.025, 0.5, 0.975], axis=0)
    lam2 = draws.arrays["lam"] ** 2
    return FitSummary(
        beta_mean=B.mean(axis=0),
        beta_sd=B.std(axis=0),
        beta_q025=q[0], beta_q50=q[1], beta_q975=q[2],
        sigma_sq_mean=float(draws.arrays["sigma_sq"].mean()),
        tau_sq_mean=float(draws.arrays["tau_sq"].mean()),
        gamma_mean=draws.arrays["gamma"].mean(axis=0),
        kappa_sq_mean=draws.arrays["kappa_sq"].mean(axis=0),
        inclusion=(lam2 / (1 + lam2)).mean(axis=0),
    )
