"""Declarative Monte Carlo experiments and their reports."""

from .config import ExperimentConfig, config_from_dict, load_config
from .experiments import (
    EXPERIMENTS,
    empirical_covariance,
    run_bv_suite,
    run_ergodic_experiment,
    run_fclt_experiment,
    run_identity_suite,
    run_integral_experiment,
    run_martingale_experiment,
)
from .report import ConvergenceReport, ReportRow, emit_report

__all__ = [
    "EXPERIMENTS",
    "ConvergenceReport",
    "ExperimentConfig",
    "ReportRow",
    "config_from_dict",
    "emit_report",
    "empirical_covariance",
    "load_config",
    "run_bv_suite",
    "run_ergodic_experiment",
    "run_fclt_experiment",
    "run_identity_suite",
    "run_integral_experiment",
    "run_martingale_experiment",
]
