"""Figure experiments, evaluation reports and the command line."""
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment, run_timing_study
from .report import EvalReport, emit_plot_data

__all__ = ["EXPERIMENTS", "ExperimentConfig", "EvalReport", "emit_plot_data", "run_experiment", "run_timing_study"]
