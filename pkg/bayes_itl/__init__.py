#!/usr/bin/env python3
"""
Bayes ITL

Bayesian inverse transition learning for tabular MDPs:
- Exact planning, evaluation and epsilon-ball structure
- Expert rollouts and Dirichlet posteriors over transitions
- Constrained rejection sampling of dynamics consistent with an expert
- Multi-dataset experiments with CSV/JSON/SVG reports
"""

from pathlib import Path
from typing import Optional, Union

from .cache import CacheManager
from .config import Config, get_config
from .core import PlanningOptions, Policy, TabularMdp, load_mdp, save_mdp
from .data import DatasetManager, TrajectoryBatch, rollout_batch
from .envs import EnvSpec, describe_env, find_env_with_structure, generate_env, reference_env
from .errors import ItlError
from .experiments import ExperimentConfig, MetricsReport, emit_outputs, run_experiment
from .posterior import DirichletPosterior, fit_posterior
from .sampler import build_context, sample_constrained

__version__ = "1.0.0"

__all__ = [
    "CacheManager",
    "Config",
    "get_config",
    "PlanningOptions",
    "Policy",
    "TabularMdp",
    "load_mdp",
    "save_mdp",
    "DatasetManager",
    "TrajectoryBatch",
    "rollout_batch",
    "EnvSpec",
    "describe_env",
    "find_env_with_structure",
    "generate_env",
    "reference_env",
    "ItlError",
    "ExperimentConfig",
    "MetricsReport",
    "emit_outputs",
    "run_experiment",
    "DirichletPosterior",
    "fit_posterior",
    "build_context",
    "sample_constrained",
    "create_experiment_config",
    "create_dataset_manager",
]


def create_experiment_config(path: Optional[Union[str, Path]] = None, **overrides) -> ExperimentConfig:
    """
    Create an experiment configuration

    Args:
        path: JSON or YAML experiment file (optional)
        **overrides: Field values applied on top

    Returns:
        ExperimentConfig from the file, or from the toolkit Config defaults

    Raises:
        pydantic.ValidationError: the overrides break a field constraint
    """
    if path:
        config = ExperimentConfig.from_file(path)
        return ExperimentConfig(**{**config.model_dump(), **overrides}) if overrides else config
    return ExperimentConfig.from_config(get_config(), **overrides)


def create_dataset_manager(data_dir: Union[str, Path], compress: bool = False) -> DatasetManager:
    """Create a batch file store rooted at data_dir"""
    return DatasetManager(data_dir, compress=compress)
