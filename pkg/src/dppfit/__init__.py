"""Stationary determinantal point processes: simulation and minimum contrast fitting."""

from .asymptotics import AsymptoticReport, B_matrix, asymptotic_covariance, sigma_g, sigma_K
from .contrast import ContrastSpec, FitOptions, FitReport, contrast_value, default_spec, fit, fit_generic
from .errors import (
    ConfigError,
    DppfitError,
    EmptyErosion,
    NegativeStatistic,
    NonPositiveStatistic,
    NormalityUndefined,
    NotInvertible,
    OptimizerFailure,
    PatternFormatError,
    PointOutsideWindow,
    StudyAborted,
    TruncationError,
    ValidationError,
    ZeroIntensity,
)
from .estimators import BandwidthRule, SmoothingKernel, bandwidth, g_hat, intensity_hat, K_hat
from .geometry import PointPattern, Window, erode, read_pattern, shift_overlap_volume, volume, write_pattern
from .kernels import (
    KernelModel,
    ParamSpace,
    correlation,
    correlation_grad,
    correlation_hess,
    param_space,
    spectral_density,
    validate,
)
from .moments import (
    SummaryCurve,
    cumulants,
    g_grad,
    g_theory,
    intensity_clt_variance,
    K_grad,
    K_theory,
)
from .sampler import SamplerConfig, pair_count_check, sample_dpp, sample_poisson
from .studio import StudyConfig, StudyResult, normality_report, run_study

__version__ = "0.1.0"

__all__ = [
    "AsymptoticReport", "B_matrix", "asymptotic_covariance", "sigma_g", "sigma_K",
    "ContrastSpec", "FitOptions", "FitReport", "contrast_value", "default_spec", "fit", "fit_generic",
    "ConfigError", "DppfitError", "EmptyErosion", "NegativeStatistic", "NonPositiveStatistic",
    "NormalityUndefined", "NotInvertible", "OptimizerFailure", "PatternFormatError",
    "PointOutsideWindow", "StudyAborted", "TruncationError", "ValidationError", "ZeroIntensity",
    "BandwidthRule", "SmoothingKernel", "bandwidth", "g_hat", "intensity_hat", "K_hat",
    "PointPattern", "Window", "erode", "read_pattern", "shift_overlap_volume", "volume", "write_pattern",
    "KernelModel", "ParamSpace", "correlation", "correlation_grad", "correlation_hess",
    "param_space", "spectral_density", "validate",
    "SummaryCurve", "cumulants", "g_grad", "g_theory", "intensity_clt_variance", "K_grad", "K_theory",
    "SamplerConfig", "pair_count_check", "sample_dpp", "sample_poisson",
    "StudyConfig", "StudyResult", "normality_report", "run_study",
]
