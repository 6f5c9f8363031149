"""
Experiments

Configuration, metrics, the multi-dataset harness and its output files.
"""

from .config import METHODS, ExperimentConfig, SamplerSettings
from .harness import MetricsReport, resolve_env, run_dataset, run_experiment
from .metrics import (
    AccuracyMetrics,
    accuracy_metrics,
    chosen_actions,
    mean_policy,
    q_star_metric,
    ranking_agreement,
    stochastic_entropy,
    true_q_star,
)
from .outputs import emit_outputs, format_cell
from .plotting import histogram_counts, plot_histograms

__all__ = [
    "METHODS",
    "ExperimentConfig",
    "SamplerSettings",
    "MetricsReport",
    "resolve_env",
    "run_dataset",
    "run_experiment",
    "AccuracyMetrics",
    "accuracy_metrics",
    "chosen_actions",
    "mean_policy",
    "q_star_metric",
    "ranking_agreement",
    "stochastic_entropy",
    "true_q_star",
    "emit_outputs",
    "format_cell",
    "histogram_counts",
    "plot_histograms",
]
