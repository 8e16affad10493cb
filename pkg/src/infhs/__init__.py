"""Horseshoe regression whose local scales are informed by co-data.

Two inference engines share one model: an exact Gibbs sampler
(:func:`run_gibbs`) and a coordinate-ascent variational approximation
(:func:`run_cavi_linear`, :func:`run_cavi_probit`).
"""

from .errors import *  # noqa: F401,F403
from .gibbs import FitSummary, GibbsConfig, GibbsSampler, run_gibbs, sample_prior, summarize
from .metrics import auc, mean_abs_diff, mse_beta, rrmse
from .model import Dataset, GibbsState, Hyperparameters, PosteriorDraws, validate
from .selection import (
    SelectionResult,
    dss_cv,
    dss_path,
    inclusion_probs,
    lambda_max,
    threshold_select,
)
from .simulate import PRESETS, CodataScenario, SimSpec, gen_codata, gen_data, simulate
from .vb import (
    VBConfig,
    VBState,
    compute_elbo,
    run_cavi_linear,
    run_cavi_probit,
    vb_inclusion_probs,
)

__version__ = "0.1.0"
