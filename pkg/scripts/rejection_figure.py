"""Target, scaled envelope and acceptance curve of the lambda_j rejection
sampler at one parameter triple; writes a plot-ready CSV."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from _common import parse_into
from infhs.g3p import choose_gamma, log_accept, sample_lambda_block
from infhs.special import log_kernel_integral


@dataclass
class Config:
    psi: float = 2.0
    alpha_sq: float = 2.25
    beta: float = -2.0
    draws: int = 100_000
    seed: int = 0
    out: str = "results/rejection_figure.csv"


def main(cfg: Config):
    g = choose_gamma(cfg.psi, cfg.alpha_sq, cfg.beta)
    x = np.linspace(1e-3, 3.0, 600)
    # normalised target x^-1 exp(-psi/x^2 - a x^2 + b x) and proposal x^g exp(-a x^2 + b x)
    log_t = -np.log(x) - cfg.psi / x**2 - cfg.alpha_sq * x**2 + cfg.beta * x
    log_g = g * np.log(x) - cfg.alpha_sq * x**2 + cfg.beta * x
    log_t -= log_kernel_integral(-1, cfg.psi, cfg.alpha_sq, cfg.beta)
    log_g -= np.log(quad(lambda t: t**g * np.exp(-cfg.alpha_sq * t**2 + cfg.beta * t), 0, np.inf)[0])
    acc = log_accept(x, cfg.psi, g)
    _, used, _ = sample_lambda_block(np.full(cfg.draws, cfg.psi), cfg.alpha_sq, cfg.beta,
                                     np.random.default_rng(cfg.seed))
    rate = cfg.draws / used.sum()
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(out, np.column_stack([x, np.exp(log_t), np.exp(log_g), np.exp(acc)]),
               delimiter=",", header="x,target,proposal,accept_prob", comments="")
    print(f"gamma = {g}; empirical acceptance = {rate:.4f} ({used.sum()} proposals)")
    print(f"wrote {out}")


if __name__ == "__main__":
    main(parse_into(Config, __doc__))
