"""Seeded Monte Carlo harness: configs, chunked runner, experiments,
CSV output."""

from .config import ConfigError, ExperimentConfig, load_config
from .engine import CHUNK_SIZE, run_chunked
from .experiments import REGISTRY, run_experiment
from .io import CSV_COLUMNS, ResultRow, format_rows, write_csv, write_sidecar
from .stats import (CI_METHOD, Z95, intervals_disjoint, mean_ci,
                    trend_verdict, variance_ci)

__all__ = [
    "CHUNK_SIZE",
    "CI_METHOD",
    "CSV_COLUMNS",
    "ConfigError",
    "ExperimentConfig",
    "REGISTRY",
    "ResultRow",
    "Z95",
    "format_rows",
    "intervals_disjoint",
    "load_config",
    "mean_ci",
    "run_chunked",
    "run_experiment",
    "trend_verdict",
    "variance_ci",
    "write_csv",
    "write_sidecar",
]
