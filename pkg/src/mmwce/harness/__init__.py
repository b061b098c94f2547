"""Experiment orchestration: configs, trial simulation, sweeps and benchmarks."""
from .bench import benchmark_runtimes
from .config import ExperimentConfig, config_echo, load_config, parse_config_text
from .simulate import generate_dataset, generate_pairs, simulate_trial, snr_to_sigma2, trial_rng
from .sweep import reproducible_csv, rows_to_csv, run_estimators, run_sweep, summarize, write_outputs

__all__ = [
    "ExperimentConfig", "benchmark_runtimes", "config_echo", "generate_dataset", "generate_pairs",
    "load_config", "parse_config_text", "reproducible_csv", "rows_to_csv", "run_estimators",
    "run_sweep", "simulate_trial", "snr_to_sigma2", "summarize", "trial_rng", "write_outputs",
]
