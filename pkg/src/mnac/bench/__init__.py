"""Experiment harness: budget search, sweeps, CSV and plot output, CLI."""

from .config import ExperimentConfig, Scheme, make_scheme
from .plot import emit_plot
from .search import BudgetResult, Unachievable, find_min_budget
from .sweeps import SweepRow, render_csv, sweep_eta, sweep_k, sweep_snr

__all__ = ["BudgetResult", "ExperimentConfig", "Scheme", "SweepRow", "Unachievable",
           "emit_plot", "find_min_budget", "make_scheme", "render_csv", "sweep_eta",
           "sweep_k", "sweep_snr"]
