"""Adaptive functional thresholding of sparse covariance functions.

Estimates the p x p matrix of marginal and cross covariance surfaces of
multivariate functional data, for fully observed curves or for noisy,
partially observed curves smoothed by local linear surface smoothers
(direct or linearly binned), and thresholds entries by their Hilbert-Schmidt
norms after standardizing by estimated variance factors.
"""

from .binning import BinnedData, binned_presmooth, binlls_cross_cov, binlls_variance_surrogate, estimate_smoothed, linear_bin
from .errors import ConfigError, DegenerateVarianceError, FormatError, InsufficientDataError, ShapeError
from .full import DenseSample, adaptive_estimate, sample_cov, universal_estimate, variance_factors
from .grid import CovField, Grid, Surface, functional_frobenius, functional_matrix_l1, hs_norm, sup_norm
from .simulate import SimSpec, simulate_full, simulate_partial
from .smoothing import (
    Bandwidths,
    PartialSample,
    default_bandwidth,
    lls_cross_cov,
    lls_marginal_cov,
    presmooth_curves,
    rate_Ijk,
    smooth_covariance,
    variance_surrogate,
)
from .thresholding import ThresholdRule, apply_threshold, parse_rule, shrinkage_factor
from .tuning import CVConfig, Fitter, cv_select_lambda, roc_sweep, support_metrics

__version__ = "0.1.0"

__all__ = [
    "Bandwidths",
    "BinnedData",
    "CVConfig",
    "ConfigError",
    "CovField",
    "DegenerateVarianceError",
    "DenseSample",
    "Fitter",
    "FormatError",
    "Grid",
    "InsufficientDataError",
    "PartialSample",
    "ShapeError",
    "SimSpec",
    "Surface",
    "ThresholdRule",
    "adaptive_estimate",
    "apply_threshold",
    "binlls_cross_cov",
    "binlls_variance_surrogate",
    "binned_presmooth",
    "cv_select_lambda",
    "default_bandwidth",
    "estimate_smoothed",
    "functional_frobenius",
    "functional_matrix_l1",
    "hs_norm",
    "linear_bin",
    "lls_cross_cov",
    "lls_marginal_cov",
    "parse_rule",
    "presmooth_curves",
    "rate_Ijk",
    "roc_sweep",
    "sample_cov",
    "shrinkage_factor",
    "simulate_full",
    "simulate_partial",
    "smooth_covariance",
    "support_metrics",
    "sup_norm",
    "universal_estimate",
    "variance_surrogate",
]
