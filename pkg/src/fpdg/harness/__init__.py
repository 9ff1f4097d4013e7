"""Experiment harness: presets, error norms, benchmark, CLI."""
from .config import ExperimentConfig, parse_config_file
from .diagnostics import (
    DiagnosticsRecord,
    convergence_rate,
    covariance_moments,
    l2h_error,
    linf_error,
)
from .presets import PRESET_NAMES, run_convergence, run_preset
from .bench import dr_benchmark
