"""Data loading, cross-validation, grid search and reporting."""

from .cv import (
    ConfigError,
    ExperimentConfig,
    GridResult,
    MetricsRow,
    best_row,
    cross_validate,
    evaluate,
    fold_indices,
    grid_search,
    default_grid,
    pct_nonzero,
)
from .data import DataFormatError, LabelDomainError, load_csv, load_dataset, load_libsvm
from .report import emit_report, parse_csv_report

__all__ = [
    "ConfigError",
    "DataFormatError",
    "ExperimentConfig",
    "GridResult",
    "LabelDomainError",
    "MetricsRow",
    "best_row",
    "cross_validate",
    "emit_report",
    "evaluate",
    "fold_indices",
    "grid_search",
    "load_csv",
    "load_dataset",
    "load_libsvm",
    "default_grid",
    "parse_csv_report",
    "pct_nonzero",
]
