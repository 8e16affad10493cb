"""Joint-distribution (Geweke) check for the Gibbs kernel.

Marginal-conditional draws come straight from the joint prior; the
successive-conditional side starts each of N chains from an exact joint
draw and applies K sweeps, each preceded by a fresh y | theta. If every
block is right the endpoints are again exact joint draws, so both samples
are i.i.d. from the same law and plain two-sample z-scores apply.
"""

import numpy as np

from infhs.gibbs import GibbsSampler, sample_prior
from infhs.model import Dataset, Hyperparameters


def tracked(s):
    v = np.concatenate([np.arctan(s.beta), [np.log(s.sigma_sq), np.log(s.tau_sq)],
                        np.log(s.lam), np.arctan(s.gamma), np.log(s.kappa_sq)])
    return np.concatenate([v, v**2])


def geweke_z(N, K, seed=1, n=8, p=4):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p))])
    z = (np.arange(p) % 2 == 0).astype(float)
    data = Dataset(np.zeros(n), X, (z[:, None],))
    hyper = Hyperparameters.default(1)
    sampler = GibbsSampler(data, hyper)
    mc, sc = [], []
    for _ in range(N):
        mc.append(tracked(sample_prior(data, hyper, rng)))
        s = sample_prior(data, hyper, rng)
        for _ in range(K):
            y = X @ s.beta + np.sqrt(s.sigma_sq) * rng.standard_normal(n)
            s = sampler.step(s, rng, y=y)
        sc.append(tracked(s))
    mc, sc = np.array(mc), np.array(sc)
    return (mc.mean(0) - sc.mean(0)) / np.sqrt(mc.var(0) / N + sc.var(0) / N)
