"""Shared data model: datasets, hyperparameters, sampler state and draws."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidBinaryResponse,
    InvalidHyper,
    MissingIntercept,
)

TASKS = ("linear", "probit")


@dataclass(frozen=True)
class Dataset:
    """Response, design matrix and co-data sources.

    ``X`` carries the intercept in column 0. Each entry of ``Z`` is a
    ``p x m_d`` co-data source given *without* an intercept column; the
    model prepends a column of ones to the first source (or uses it as the
    only source when ``Z`` is empty), so an empty list means "no co-data".
    """

    y: np.ndarray
    X: np.ndarray
    Z: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).ravel())
        object.__setattr__(self, "X", np.atleast_2d(np.asarray(self.X, dtype=float)))
        Z = tuple(np.asarray(z, dtype=float).reshape(len(z), -1) for z in self.Z)
        object.__setattr__(self, "Z", Z)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1] - 1

    @property
    def source_sizes(self) -> list[int]:
        """Column counts m_d of the stacked co-data, intercept included."""
        if not self.Z:
            return [1]
        return [self.Z[0].shape[1] + 1] + [z.shape[1] for z in self.Z[1:]]

    @property
    def D(self) -> int:
        return len(self.source_sizes)

    @property
    def M(self) -> int:
        return sum(self.source_sizes)

    def stacked_codata(self) -> np.ndarray:
        """``p x M`` matrix ``[1_p, Z_1, ..., Z_D]``."""
        ones = np.ones((self.p, 1))
        if not self.Z:
            return ones
        return np.hstack([ones, *self.Z])

    def source_index(self) -> np.ndarray:
        """Source id (0-based) of every stacked co-data column."""
        return np.repeat(np.arange(self.D), self.source_sizes)

    def standardized(self) -> "Dataset":
        """Copy with centred, unit-variance covariates and continuous co-data.

        Binary (0/1) co-data columns are left alone.
        """
        X = self.X.copy()
        sd = X[:, 1:].std(axis=0)
        sd[sd == 0] = 1.0
        X[:, 1:] = (X[:, 1:] - X[:, 1:].mean(axis=0)) / sd
        Z = []
        for z in self.Z:
            z = z.copy()
            for k in range(z.shape[1]):
                col = z[:, k]
                if np.isin(col, (0.0, 1.0)).all():
                    continue
                s = col.std()
                z[:, k] = (col - col.mean()) / (s if s > 0 else 1.0)
            Z.append(z)
        return Dataset(self.y, X, tuple(Z))


@dataclass(frozen=True)
class Hyperparameters:
    """Prior settings: IG(v, q) on sigma^2, IG(a_d, b_d) on kappa_d^2, and
    the squared scale ``s0_sq`` of the local-scale prior."""

    v: float = 1.0
    q: float = 10.0
    a: tuple = (1.0,)
    b: tuple = (10.0,)
    s0_sq: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(np.atleast_1d(np.asarray(self.a, float))))
        object.__setattr__(self, "b", tuple(np.atleast_1d(np.asarray(self.b, float))))

    @classmethod
    def default(cls, D: int = 1, **overrides) -> "Hyperparameters":
        kw = dict(a=(1.0,) * D, b=(10.0,) * D)
        kw.update(overrides)
        return cls(**kw)

    def for_sources(self, D: int) -> "Hyperparameters":
        """Broadcast length-1 ``a``/``b`` to ``D`` sources."""
        a, b = self.a, self.b
        if len(a) == 1 and D > 1:
            a = a * D
        if len(b) == 1 and D > 1:
            b = b * D
        return replace(self, a=a, b=b)

    @property
    def a_arr(self) -> np.ndarray:
        return np.asarray(self.a, float)

    @property
    def b_arr(self) -> np.ndarray:
        return np.asarray(self.b, float)


def validate(dataset: Dataset, hyper: Hyperparameters, task: str = "linear") -> None:
    """Raise on any violated invariant; return ``None`` otherwise."""
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    X, y = dataset.X, dataset.y
    if X.ndim != 2 or X.shape[1] < 2:
        raise DimensionMismatch("X must be n x (p+1) with p >= 1")
    n, p = dataset.n, dataset.p
    if n < 2:
        raise DimensionMismatch("need n >= 2 observations")
    if y.shape[0] != n:
        raise DimensionMismatch(f"y has {y.shape[0]} entries, X has {n} rows")
    for d, z in enumerate(dataset.Z, start=1):
        if z.shape[0] != p:
            raise DimensionMismatch(f"Z_{d} has {z.shape[0]} rows, expected p={p}")
        if z.shape[1] < 1:
            raise DimensionMismatch(f"Z_{d} has no columns")
    if not np.all(X[:, 0] == 1.0):
        raise MissingIntercept("column 0 of X must be all ones")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DimensionMismatch("X and y must be finite")
    if any(not np.all(np.isfinite(z)) for z in dataset.Z):
        raise DimensionMismatch("co-data must be finite")

    D = dataset.D
    if len(hyper.a) != D or len(hyper.b) != D:
        raise DimensionMismatch(f"hyperparameters a, b need length D={D}")
    scalars = (hyper.v, hyper.q, hyper.s0_sq)
    if not all(np.isfinite(s) and s > 0 for s in scalars):
        raise InvalidHyper("v, q and s0_sq must be positive")
    if not (np.all(hyper.a_arr > 0) and np.all(hyper.b_arr > 0)):
        raise InvalidHyper("a and b must be positive")

    if task == "probit" and not np.all(np.isin(y, (0.0, 1.0))):
        raise InvalidBinaryResponse("probit response must be 0/1")


STATE_FIELDS = (
    "beta", "sigma_sq", "tau_sq", "zeta", "lambda0_sq", "psi0",
    "lam", "phi_sq", "gamma", "kappa_sq",
)


@dataclass
class GibbsState:
    beta: np.ndarray
    sigma_sq: float
    tau_sq: float
    zeta: float
    lambda0_sq: float
    psi0: float
    lam: np.ndarray
    phi_sq: np.ndarray
    gamma: np.ndarray
    kappa_sq: np.ndarray

    def copy(self) -> "GibbsState":
        return GibbsState(**{f.name: np.copy(getattr(self, f.name)) for f in fields(self)})

    def is_positive(self) -> bool:
        scalars = (self.sigma_sq, self.tau_sq, self.zeta, self.lambda0_sq, self.psi0)
        return (all(s > 0 for s in scalars) and np.all(self.lam > 0)
                and np.all(self.phi_sq > 0) and np.all(self.kappa_sq > 0))


@dataclass
class PosteriorDraws:
    """Retained Gibbs draws, stored column-wise (one array per parameter).

    Indexing returns a :class:`GibbsState` snapshot.
    """

    arrays: dict
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.arrays["sigma_sq"])

    def __getitem__(self, i: int) -> GibbsState:
        return GibbsState(**{k: np.copy(self.arrays[k][i]) for k in STATE_FIELDS})

    def __getattr__(self, name):
        arrays = self.__dict__.get("arrays")
        if arrays is not None and name in arrays:
            return arrays[name]
        raise AttributeError(name)

    @classmethod
    def from_states(cls, states: Sequence[GibbsState], meta=None) -> "PosteriorDraws":
        arrays = {k: np.array([np.copy(getattr(s, k)) for s in states]) for k in STATE_FIELDS}
        return cls(arrays, dict(meta or {}))
