"""Evaluation metrics."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateLabels, DimensionMismatch


def auc(scores, truth) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic (ties count 1/2)."""
    s = np.asarray(scores, float)
    t = np.asarray(truth, bool)
    if s.shape != t.shape:
        raise DimensionMismatch("scores and truth differ in length")
    n1 = int(t.sum())
    n0 = t.size - n1
    if n1 == 0 or n0 == 0:
        raise DegenerateLabels("need at least one positive and one negative label")
    r = rankdata(s)
    return float((r[t].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def mse_beta(beta_a, beta_b) -> float:
    """Squared Euclidean distance between two coefficient vectors."""
    a, b = np.asarray(beta_a, float), np.asarray(beta_b, float)
    if a.shape != b.shape:
        raise DimensionMismatch("coefficient vectors differ in length")
    return float(np.sum((a - b) ** 2))


def rrmse(mse_model: float, mse_null: float) -> float:
    """Relative reduction of prediction error against a null model."""
    if not mse_null > 0:
        raise ValueError("mse_null must be positive")
    return 1.0 - mse_model / mse_null


def mean_abs_diff(y, probs) -> float:
    y, pr = np.asarray(y, float), np.asarray(probs, float)
    if y.shape != pr.shape:
        raise DimensionMismatch("labels and probabilities differ in length")
    return float(np.mean(np.abs(y - pr)))
