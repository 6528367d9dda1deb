"""Closed-loop trials, the cohort study, benchmarks and file outputs."""
from .bench import exact_gp_baseline, run_bench
from .config import ExperimentConfig, load_config, save_config
from .export import read_run_csv, write_json, write_run_csv
from .metrics import aggregate, summarize
from .study import run_study
from .trial import RunLog, run_trial

__all__ = [
    "ExperimentConfig",
    "load_config",
    "save_config",
    "RunLog",
    "run_trial",
    "run_study",
    "run_bench",
    "exact_gp_baseline",
    "summarize",
    "aggregate",
    "write_run_csv",
    "read_run_csv",
    "write_json",
]
