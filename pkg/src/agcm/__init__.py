"""Additive growth curve models with orthogonal between-individual designs.

Two-stage generalized least squares estimation, a quadratic covariance
estimator, AIC-based degree selection and Monte Carlo diagnostics.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .datasets import (
    LongitudinalDataset,
    SelectionEntry,
    SelectionResult,
    dental_dataset,
    fit_degrees,
    load_csv,
    select_degrees,
)
from .errors import AgcmError, IoError, NumericError, ValidationError
from .estimation import (
    CovarianceEstimate,
    FitResult,
    aic,
    covariance_estimate,
    fit,
    fit_vec_form,
    h_matrix,
    quadratic_covariance,
    rmss,
)
from .inference import (
    AsymptoticReport,
    Hypothesis,
    coeff_asymptotic_covariance,
    fourth_moment_covariance,
    gaussian_fourth_moment_covariance,
    standardized_statistic,
)
from .model import (
    DesignBlock,
    ModelSpec,
    ProfileMatrix,
    build_group_indicator,
    build_polynomial_profile,
    indicator_spec,
    validate,
)
from .report import emit_report, render
from .simulation import (
    ConsistencyRow,
    McReport,
    SimulationScenario,
    aic_candidates,
    consistency_sweep,
    generate,
    mc_aic,
    normality_check,
    serial_sigma,
)

__all__ = [
    "AgcmError",
    "AsymptoticReport",
    "ConsistencyRow",
    "CovarianceEstimate",
    "DesignBlock",
    "FitResult",
    "Hypothesis",
    "IoError",
    "LongitudinalDataset",
    "McReport",
    "ModelSpec",
    "NumericError",
    "ProfileMatrix",
    "SelectionEntry",
    "SelectionResult",
    "SimulationScenario",
    "ValidationError",
    "aic",
    "aic_candidates",
    "build_group_indicator",
    "build_polynomial_profile",
    "coeff_asymptotic_covariance",
    "consistency_sweep",
    "covariance_estimate",
    "dental_dataset",
    "emit_report",
    "fit",
    "fit_degrees",
    "fit_vec_form",
    "fourth_moment_covariance",
    "gaussian_fourth_moment_covariance",
    "generate",
    "h_matrix",
    "indicator_spec",
    "load_csv",
    "mc_aic",
    "normality_check",
    "quadratic_covariance",
    "render",
    "rmss",
    "select_degrees",
    "serial_sigma",
    "standardized_statistic",
    "validate",
]
