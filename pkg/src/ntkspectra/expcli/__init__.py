"""Experiment configurations, figure runners, result tables and the CLI."""

from .catalog import CATALOG, defaults_for, list_experiments
from .config import EXPERIMENT_IDS, ExperimentConfig, build_config, load_config, validate
from .figures import RUNNERS, RunResult, run
from .results import ResultTable, read_table

__all__ = [
    "CATALOG", "EXPERIMENT_IDS", "ExperimentConfig", "ResultTable", "RunResult", "RUNNERS",
    "build_config", "defaults_for", "list_experiments", "load_config", "read_table", "run", "validate",
]
