#!/usr/bin/env python3
"""
Experiment Harness

Runs every method over many offline datasets for each (epsilon, K) cell and
collects per-dataset metrics. Each dataset is an independent task with its
own derived seeds, so results do not depend on how tasks are scheduled.
"""

import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy
from tqdm import tqdm

from ..cache import CacheManager
from ..core import PlanningOptions, Policy, TabularMdp, build_expert_policy, epsilon_ball, load_mdp, q_expert
from ..data import derive_dataset_seed, rollout_batch
from ..envs import EnvSpec, find_env_with_structure
from ..errors import ExperimentFailedError, ItlError
from ..posterior import fit_posterior, posterior_mean, sample_full
from ..sampler import DeltaTuning, SamplerLimits, build_context, sample_constrained
from .config import ExperimentConfig
from .metrics import (
    accuracy_metrics,
    mean_policy,
    q_star_metric,
    ranking_agreement,
    stochastic_entropy,
    true_q_star,
)

logger = logging.getLogger("BayesITL.Harness")

METHOD_TAGS = {"mle": 1, "posterior": 2, "constrained": 3}
METHOD_ORDER = ("expert", "mle", "posterior", "constrained")
METRIC_COLUMNS = (
    "deterministic_accuracy",
    "stochastic_accuracy",
    "mistake_ball_rate",
    "q_star_metric",
    "ranking_agreement",
    "stochastic_entropy",
)
CELL_KEYS = ["method", "epsilon", "episodes"]


@dataclass(frozen=True)
class DatasetTask:
    """Everything one worker needs for one dataset of one cell"""

    mdp: TabularMdp
    expert: Policy
    epsilon: float
    epsilon_index: int
    episodes: int
    dataset_index: int
    dataset_seed: int
    config: ExperimentConfig
    options: PlanningOptions


@dataclass
class MetricsReport:
    """
    Per-dataset metric records, flagged runs and provenance of one experiment

    Attributes:
        config: Experiment configuration
        records: One row per (method, epsilon, K, dataset) that completed
        flagged: One entry per (method, epsilon, K, dataset) that raised
        provenance: Seeds, hashes and library versions
    """

    config: ExperimentConfig
    records: List[Dict[str, Any]] = field(default_factory=list)
    flagged: List[Dict[str, Any]] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        """Per-dataset records in (epsilon, K, dataset, method) order"""
        columns = CELL_KEYS + ["dataset"] + list(METRIC_COLUMNS)
        frame = pd.DataFrame(self.records)
        if frame.empty:
            return pd.DataFrame(columns=columns)
        frame["method"] = pd.Categorical(frame["method"], categories=METHOD_ORDER, ordered=True)
        frame = frame.sort_values(["epsilon", "episodes", "dataset", "method"], kind="mergesort")
        return frame.reset_index(drop=True)

    def summary(self) -> pd.DataFrame:
        """Mean and population std of every metric per (method, epsilon, K); NaN cells stay NaN"""
        frame = self.frame()
        grouped = frame.groupby(CELL_KEYS, observed=True, sort=True)[list(METRIC_COLUMNS)]
        means = grouped.mean().add_suffix("_mean")
        stds = grouped.std(ddof=0).add_suffix("_std")
        counts = grouped.size().rename("n_datasets")
        summary = pd.concat([means, stds, counts], axis=1).reset_index()
        ordered = ["method", "epsilon", "episodes", "n_datasets"]
        for metric in METRIC_COLUMNS:
            ordered += [f"{metric}_mean", f"{metric}_std"]
        return summary[ordered]

    def values(self, method: str, epsilon: float, episodes: int, metric: str = "q_star_metric") -> np.ndarray:
        """Per-dataset values of one metric in one cell, in dataset order"""
        frame = self.frame()
        rows = frame[(frame["method"] == method) & (frame["epsilon"] == epsilon) & (frame["episodes"] == episodes)]
        return rows[metric].to_numpy(dtype=float)

    @property
    def total_runs(self) -> int:
        return len(self.config.epsilons) * len(self.config.episode_counts) * self.config.n_datasets

    @property
    def flagged_runs(self) -> int:
        """Distinct (epsilon, K, dataset) runs with at least one flagged method"""
        return len({(f["epsilon"], f["episodes"], f["dataset"]) for f in self.flagged})


def resolve_env(config: ExperimentConfig,
                options: Optional[PlanningOptions] = None,
                cache: Optional[CacheManager] = None) -> TabularMdp:
    """The true environment of an experiment: a file, or a structure search"""
    if config.env_path:
        logger.info(f"Loading environment from {config.env_path}")
        return load_mdp(config.env_path)
    return find_env_with_structure(EnvSpec(**config.env_spec), config.targets, config.max_tries,
                                   options=options, cache=cache)


def _method_stream(task: DatasetTask, method: str) -> np.random.Generator:
    entropy = [task.dataset_seed, METHOD_TAGS[method], task.epsilon_index, task.episodes]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _score(task: DatasetTask, method: str, pi_hat: Policy, q_hat) -> Dict[str, Any]:
    mdp, expert, options = task.mdp, task.expert, task.options
    accuracy = accuracy_metrics(mdp, expert, pi_hat, task.epsilon, options)
    return {
        "method": method,
        "epsilon": task.epsilon,
        "episodes": task.episodes,
        "dataset": task.dataset_index,
        "deterministic_accuracy": accuracy.deterministic,
        "stochastic_accuracy": accuracy.stochastic,
        "mistake_ball_rate": accuracy.mistake_ball_rate,
        "q_star_metric": q_star_metric(mdp, pi_hat, options),
        "ranking_agreement": ranking_agreement(mdp, expert, q_hat, options),
        "stochastic_entropy": stochastic_entropy(expert, pi_hat, terminal=mdp.terminal),
    }


def _run_method(task: DatasetTask, method: str, post) -> Tuple[Policy, Any, Dict[str, Any]]:
    mdp, config, options = task.mdp, task.config, task.options
    n_samples = config.n_posterior_samples

    if method == "mle":
        _, q_hat, pi_hat = options.plan(mdp.with_transitions(posterior_mean(post)))
        return pi_hat, q_hat, {}

    rng = _method_stream(task, method)
    if method == "posterior":
        samples = [sample_full(post, rng) for _ in range(n_samples)]
        pi_hat, q_hat = mean_policy(samples, mdp.rewards, mdp.discount, mdp.terminal, options)
        return pi_hat, q_hat, {}

    settings = config.sampler
    ctx = build_context(post, task.expert, mdp.rewards, mdp.discount, task.epsilon,
                        anchor_mode=settings.anchor_mode, rng=rng, terminal=mdp.terminal)
    result = sample_constrained(
        post, ctx, n_samples,
        limits=SamplerLimits(settings.max_row_draws, settings.max_outer_rounds, settings.draw_block),
        tuning=DeltaTuning(settings.gap_factor, settings.window_factor, settings.delta_floor),
        ball_source=settings.ball_source,
        rng=rng,
        equality_mode=settings.equality_mode,
        options=options,
        margin_tol=settings.margin_tol,
    )
    pi_hat, q_hat = mean_policy(result.samples, mdp.rewards, mdp.discount, mdp.terminal, options)

    never_taken = ~task.expert.support_mask
    never_taken[mdp.terminal] = False
    diagnostics = {
        "acceptance_rate": result.acceptance_rate,
        "never_taken_draws": float(result.per_row_draw_counts[never_taken].mean() / result.outer_rounds_used)
        if never_taken.any() else math.nan,
    }
    return pi_hat, q_hat, diagnostics


def run_dataset(task: DatasetTask) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
    """
    All methods on one dataset

    Returns:
        (records, flagged): metric rows for methods that completed, and one
        entry per method that raised
    """
    mdp = task.mdp
    batch = rollout_batch(mdp, task.expert, task.episodes, task.config.horizon, task.dataset_seed)
    post = fit_posterior(batch, task.config.prior_concentration, terminal=mdp.terminal)

    records = [_score(task, "expert", task.expert, q_expert(mdp, task.expert))]
    flagged = []

    for method in task.config.methods:
        try:
            pi_hat, q_hat, diagnostics = _run_method(task, method, post)
        except ItlError as e:
            logger.warning(f"Dataset {task.dataset_index} (eps {task.epsilon}, K {task.episodes}) "
                           f"flagged for {method}: {e}")
            flagged.append({
                "method": method,
                "epsilon": task.epsilon,
                "episodes": task.episodes,
                "dataset": task.dataset_index,
                "error": type(e).__name__,
                "message": str(e),
            })
            continue
        record = _score(task, method, pi_hat, q_hat)
        record.update(diagnostics)
        records.append(record)

    return records, flagged


def provenance(config: ExperimentConfig, mdp: TabularMdp) -> Dict[str, Any]:
    return {
        "master_seed": config.master_seed,
        "dataset_seeds": [derive_dataset_seed(config.master_seed, i) for i in range(config.n_datasets)],
        "seed_derivation": "master_seed XOR ((i + 1) * 0x9E3779B97F4A7C15) mod 2^64",
        "config_hash": config.config_hash(),
        "env_fingerprint": mdp.fingerprint,
        "environment": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
    }


def run_experiment(config: ExperimentConfig,
                   jobs: int = 1,
                   mdp: Optional[TabularMdp] = None,
                   options: Optional[PlanningOptions] = None,
                   cache: Optional[CacheManager] = None) -> MetricsReport:
    """
    Run the full (epsilon, K, dataset) grid

    Args:
        config: Experiment configuration
        jobs: Worker processes (1 runs in-process)
        mdp: True environment (default: resolved from the config)
        options: Planning settings
        cache: Cache for the environment structure search

    Returns:
        MetricsReport

    Raises:
        ExperimentFailedError: more than max_flag_fraction of dataset runs were
            flagged; the error carries the partial report
    """
    options = options or PlanningOptions()
    mdp = mdp or resolve_env(config, options, cache)
    q_star = true_q_star(mdp, options)

    tasks = []
    for epsilon_index, epsilon in enumerate(config.epsilons):
        expert = build_expert_policy(epsilon_ball(q_star, epsilon))
        for episodes in config.episode_counts:
            for i in range(config.n_datasets):
                tasks.append(DatasetTask(mdp, expert, float(epsilon), epsilon_index, episodes, i,
                                         derive_dataset_seed(config.master_seed, i), config, options))

    logger.info(f"Running {len(tasks)} dataset tasks for methods {config.methods} with {jobs} job(s)")

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(tqdm(executor.map(run_dataset, tasks, chunksize=max(1, len(tasks) // (jobs * 8))),
                                total=len(tasks), desc="datasets", disable=not config.progress))
    else:
        results = [run_dataset(task) for task in tqdm(tasks, desc="datasets", disable=not config.progress)]

    report = MetricsReport(config=config, provenance=provenance(config, mdp))
    for records, flagged in results:
        report.records.extend(records)
        report.flagged.extend(flagged)

    logger.info(f"Experiment finished: {len(report.records)} records, {report.flagged_runs} flagged runs")

    if report.flagged_runs > config.max_flag_fraction * report.total_runs:
        raise ExperimentFailedError(report, report.flagged_runs, report.total_runs)

    return report
