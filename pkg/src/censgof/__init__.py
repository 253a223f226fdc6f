"""Goodness-of-fit tests for Type-II right-censored samples.

Censored samples are mapped to complete uniform samples, then to normal
scores, and tested for normality with Cramer-von Mises, Anderson-Darling or
characteristic-function statistics.
"""

__version__ = "0.1.0"

from .critvals import CriticalValueTable, simulate_critical_values
from .data import CensoredSample
from .distributions import Family, FamilySpec, parse_family, sample_censored
from .estimators import Estimate, estimate
from .exceptions import (
    CensGofError,
    ClampWarning,
    ConfigurationError,
    ConvergenceError,
    CoverageError,
    DecompositionError,
    DegenerateInputError,
    DomainError,
    ParameterDomainError,
    PrecisionWarning,
    ShapeError,
    StudyAbortedError,
    TieWarning,
    UnsupportedNullError,
)
from .harness import (
    PowerTable,
    StudyConfig,
    emit_report,
    rank_summary,
    read_report,
    run_level_study,
    run_power_study,
)
from .process_lab import ProcessCurves, ProcessGrid, durbin_covariance, simulate_decomposition
from .stats import (
    GofResult,
    Statistic,
    ad_statistic,
    cf_statistic,
    cvm_statistic,
    direct_statistics,
    run_test,
)
from .transforms import TransformKind, chen_balakrishnan, transformation7

__all__ = [
    "CensGofError", "CensoredSample", "ClampWarning", "ConfigurationError", "ConvergenceError",
    "CoverageError", "CriticalValueTable", "DecompositionError", "DegenerateInputError",
    "DomainError", "Estimate", "Family", "FamilySpec", "GofResult", "ParameterDomainError",
    "PowerTable", "PrecisionWarning", "ProcessCurves", "ProcessGrid", "ShapeError", "Statistic",
    "StudyAbortedError", "StudyConfig", "TieWarning", "TransformKind", "UnsupportedNullError",
    "ad_statistic", "cf_statistic", "chen_balakrishnan", "cvm_statistic", "direct_statistics",
    "durbin_covariance", "emit_report", "estimate", "parse_family", "rank_summary", "read_report",
    "run_level_study", "run_power_study", "run_test", "sample_censored", "simulate_critical_values",
    "simulate_decomposition", "transformation7",
]
