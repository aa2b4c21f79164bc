"""Kriging predictors, confidence bands and their reliability diagnostics."""

from .designs import (
    Design,
    fill_distance,
    grid_design,
    halton_design,
    halton_points,
    quasi_uniformity_ratio,
    separation_radius,
    uniform_random_design,
)
from .errors import (
    ConditioningError,
    ConfigError,
    DomainError,
    InputError,
    KrigingError,
    ModeError,
    ParameterError,
    ShapeError,
)
from .experiments import (
    ExperimentConfig,
    run_deterministic_experiment,
    run_experiment,
    run_gp_baseline,
    run_power_rate_study,
    run_stochastic_experiment,
)
from .gp import (
    FitConfig,
    FittedModel,
    PredictionBand,
    build_correlation_matrix,
    confidence_band,
    factorize,
    fit,
    native_norm_sq_of_interpolant,
    power_function,
    predict_mean,
    rkhs_function_from_coefficients,
    sample_gp_path,
    sup_power,
    sup_power_precise,
)
from .kernels import KernelFamily, KernelSpec, bessel_k, correlation, normal_quantile
from .reliability import ReliabilityReport, acp, coverage_rate, loglog_slope, ratio_metric

__version__ = "0.1.0"

__all__ = [
    "ConditioningError",
    "ConfigError",
    "Design",
    "DomainError",
    "ExperimentConfig",
    "FitConfig",
    "FittedModel",
    "InputError",
    "KernelFamily",
    "KernelSpec",
    "KrigingError",
    "ModeError",
    "ParameterError",
    "PredictionBand",
    "ReliabilityReport",
    "ShapeError",
    "acp",
    "bessel_k",
    "build_correlation_matrix",
    "confidence_band",
    "correlation",
    "coverage_rate",
    "factorize",
    "fill_distance",
    "fit",
    "grid_design",
    "halton_design",
    "halton_points",
    "loglog_slope",
    "native_norm_sq_of_interpolant",
    "normal_quantile",
    "power_function",
    "predict_mean",
    "quasi_uniformity_ratio",
    "ratio_metric",
    "rkhs_function_from_coefficients",
    "run_deterministic_experiment",
    "run_experiment",
    "run_gp_baseline",
    "run_power_rate_study",
    "run_stochastic_experiment",
    "sample_gp_path",
    "separation_radius",
    "sup_power",
    "sup_power_precise",
    "uniform_random_design",
    "__version__",
]
