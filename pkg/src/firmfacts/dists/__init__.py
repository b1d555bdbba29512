"""Probability distribution families: density, CDF, quantile, sampling,
moments, and fitting (MLE and LAD)."""

from .core import (cdf, fit_lad, fit_mle, logpdf, loglik, moments, pdf,
                   quantile, sample, sample_rng)
from .params import N_PARAMS, PARAM_NAMES, Family, FitResult, ParamVector

__all__ = [
    "Family", "ParamVector", "FitResult", "N_PARAMS", "PARAM_NAMES",
    "logpdf", "pdf", "cdf", "quantile", "sample", "sample_rng",
    "moments", "loglik", "fit_mle", "fit_lad",
]
