#!/usr/bin/env python3
"""
Command-line interface for environments, datasets, sampling and experiments.

No side effects on import; `main(argv)` returns the process exit code:
0 on success, 1 on configuration or I/O errors, 2 when an experiment
flags too many datasets.
"""

import argparse
import gzip
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..cache import CacheManager, get_cache_manager
from ..config import get_config
from ..core import PlanningOptions, expert_policy_for, load_mdp, save_mdp
from ..data import DatasetManager, load_batch, rollout_datasets
from ..envs import EnvSpec, describe_env, find_env_with_structure, generate_env, parse_targets, reference_env
from ..errors import ConfigError, ExperimentFailedError, ItlError
from ..experiments import ExperimentConfig, emit_outputs, plot_histograms, run_experiment
from ..posterior import fit_posterior, posterior_mean
from ..sampler import DeltaTuning, SamplerLimits, build_context, sample_constrained

# Handlers are configured only when run as a script
logger = logging.getLogger("BayesITL.CLI")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FLAGGED = 2

ENV_SPEC_FLAGS = ("n_decision_states", "n_actions", "discount", "skew_mix", "skew_concentration",
                  "flat_concentration", "reward_low", "reward_high", "reward_mode", "seed")


def _parse_floats(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _write_json(document: Dict, out: Path, compress: bool = False) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if compress:
        if out.suffix != ".gz":
            out = out.with_name(out.name + ".gz")
        with gzip.open(out, "wt") as f:
            json.dump(document, f)
    else:
        with open(out, "w") as f:
            json.dump(document, f, indent=2, sort_keys=True)
            f.write("\n")
    return out


class BayesItlCLI:
    """Command handlers; each returns an exit code"""

    def __init__(self, config=None):
        self.config = config or get_config()
        self.options = PlanningOptions.from_config(self.config)

    def gen_env(self, args) -> int:
        overrides = {name: getattr(args, name) for name in ENV_SPEC_FLAGS if getattr(args, name) is not None}

        if args.reference:
            mdp = reference_env(self.config)
        elif args.targets:
            spec = EnvSpec.from_config(self.config, **overrides)
            mdp = find_env_with_structure(spec, parse_targets(args.targets), args.max_tries,
                                          options=self.options, cache=self._cache())
        else:
            mdp = generate_env(EnvSpec.from_config(self.config, **overrides))

        path = save_mdp(mdp, args.out)
        print(f"Wrote environment {mdp.fingerprint} to {path}")
        return EXIT_OK

    def describe_env(self, args) -> int:
        mdp = load_mdp(args.env)
        description = describe_env(mdp, _parse_floats(args.epsilons), self.options)
        document = description.to_document()
        document["fingerprint"] = mdp.fingerprint
        print(json.dumps(document, indent=2, sort_keys=True))
        return EXIT_OK

    def gen_data(self, args) -> int:
        mdp = load_mdp(args.env)
        expert = expert_policy_for(mdp, args.expert_epsilon, self.options)
        batches = rollout_datasets(mdp, expert, args.episodes, args.horizon, args.n_datasets,
                                   args.master_seed, jobs=args.jobs)
        for batch in batches:
            batch.metadata["expert_epsilon"] = args.expert_epsilon

        manager = DatasetManager(args.out_dir, compress=args.compress)
        paths = manager.save_batches(batches)
        print(f"Wrote {len(paths)} batches to {manager.data_dir}")
        return EXIT_OK

    def fit_mle(self, args) -> int:
        batch = load_batch(args.batch)
        prior = self.config.get("posterior.prior_concentration", 1.0)
        post = fit_posterior(batch, prior)
        document = {
            "metadata": {**batch.metadata, "prior_concentration": prior},
            "transitions": posterior_mean(post).tolist(),
        }
        path = _write_json(document, args.out)
        print(f"Wrote T^MLE to {path}")
        return EXIT_OK

    def itl_sample(self, args) -> int:
        mdp = load_mdp(args.env)
        batch = load_batch(args.batch)
        expert = expert_policy_for(mdp, args.expert_epsilon, self.options)
        post = fit_posterior(batch, self.config.get("posterior.prior_concentration", 1.0),
                             terminal=mdp.terminal)

        rng = np.random.default_rng(args.seed)
        ctx = build_context(post, expert, mdp.rewards, mdp.discount, args.expert_epsilon,
                            anchor_mode=args.anchor, rng=rng, terminal=mdp.terminal)
        result = sample_constrained(
            post, ctx, args.n_samples,
            limits=SamplerLimits.from_config(self.config),
            tuning=DeltaTuning.from_config(self.config),
            ball_source=args.ball_source,
            rng=rng,
            equality_mode=args.equality_mode,
            enforce_constraints=not args.no_constraints,
            options=self.options,
            margin_tol=self.config.get("sampler.margin_tol", 1e-9),
        )

        document = result.to_document()
        document["metadata"] = {
            "env_fingerprint": mdp.fingerprint,
            "batch": batch.metadata,
            "expert_epsilon": args.expert_epsilon,
            "anchor_mode": ctx.anchor_mode.value,
            "ball_source": args.ball_source,
            "seed": args.seed,
        }
        path = _write_json(document, args.out, compress=args.compress)
        print(f"Accepted {result.accepted} samples in {result.outer_rounds_used} rounds; wrote {path}")
        return EXIT_OK

    def experiment(self, args) -> int:
        config = ExperimentConfig.from_file(args.config)
        overrides = {key: value for key, value in (("n_datasets", args.n_datasets),
                                                   ("n_posterior_samples", args.n_samples))
                     if value is not None}
        if args.progress:
            overrides["progress"] = True
        if overrides:
            config = ExperimentConfig(**{**config.model_dump(), **overrides})

        out_dir = args.out_dir or config.out_dir
        if not out_dir:
            raise ConfigError("an output directory is required (--out-dir or out_dir in the config)")

        try:
            report = run_experiment(config, jobs=args.jobs, options=self.options, cache=self._cache())
        except ExperimentFailedError as e:
            emit_outputs(e.report, out_dir)
            print(f"Experiment failed: {e}; partial outputs in {out_dir}", file=sys.stderr)
            return EXIT_FLAGGED

        emit_outputs(report, out_dir)
        print(f"Wrote experiment outputs to {out_dir}")
        return EXIT_OK

    def plot(self, args) -> int:
        frame = pd.read_csv(args.metrics)
        if args.epsilon is not None:
            frame = frame[np.isclose(frame["epsilon"], args.epsilon)]
        if args.episodes is not None:
            frame = frame[frame["episodes"] == args.episodes]

        methods = args.methods.split(",") if args.methods else list(dict.fromkeys(frame["method"]))
        values = {m: frame.loc[frame["method"] == m, args.column].to_numpy(dtype=float) for m in methods}
        counts = plot_histograms(values, args.out, bins=args.bins, xlabel=args.column)
        for method, bins in counts.items():
            print(f"{method}: {int(bins.sum())} values in {len(bins)} bins")
        print(f"Wrote {args.out}")
        return EXIT_OK

    def serve(self, args) -> int:
        from ..api import serve

        serve(host=args.host, port=args.port, results_root=args.results_root)
        return EXIT_OK

    def cache(self, args) -> int:
        cache = CacheManager(args.cache_dir) if args.cache_dir else get_cache_manager()
        if args.clear:
            cache.clear_all()
            print("Cleared cache")
        if args.cleanup is not None:
            print(f"Removed {cache.cleanup_expired(args.cleanup)} expired entries")
        if args.stats or not (args.clear or args.cleanup is not None):
            for key, value in cache.get_cache_stats().items():
                print(f"{key}: {value}")
        return EXIT_OK

    def _cache(self) -> Optional[CacheManager]:
        return get_cache_manager() if self.config.get("cache.enabled", True) else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bayes-itl", description="Bayesian inverse transition learning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-env", help="Generate a random environment")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-decision-states", type=int)
    p.add_argument("--n-actions", type=int)
    p.add_argument("--discount", type=float)
    p.add_argument("--skew-mix", type=float)
    p.add_argument("--skew-concentration", type=float)
    p.add_argument("--flat-concentration", type=float)
    p.add_argument("--reward-low", type=float)
    p.add_argument("--reward-high", type=float)
    p.add_argument("--reward-mode", choices=["state_action", "action"])
    p.add_argument("--targets", help="Search seeds for a structure, e.g. '0:0,3:3,4:6'")
    p.add_argument("--max-tries", type=int, default=100_000)
    p.add_argument("--reference", action="store_true", help="Write the reference environment")

    p = sub.add_parser("describe-env", help="Stochastic-policy state counts per epsilon")
    p.add_argument("--env", required=True, type=Path)
    p.add_argument("--epsilons", default="0,3,4")

    p = sub.add_parser("gen-data", help="Roll out the expert into batch files")
    p.add_argument("--env", required=True, type=Path)
    p.add_argument("--expert-epsilon", type=float, required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--n-datasets", type=int, default=1)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--compress", action="store_true")

    p = sub.add_parser("fit-mle", help="Write the posterior-mean transitions of a batch")
    p.add_argument("--batch", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("itl-sample", help="Constrained posterior samples for one batch")
    p.add_argument("--env", required=True, type=Path)
    p.add_argument("--expert-epsilon", type=float, required=True)
    p.add_argument("--batch", required=True, type=Path)
    p.add_argument("--n-samples", type=int, default=100)
    p.add_argument("--anchor", choices=["mle", "sample"], default="mle")
    p.add_argument("--ball-source", choices=["q-star", "q-expert"], default="q-star")
    p.add_argument("--equality-mode", choices=["pin", "tolerance"], default="pin")
    p.add_argument("--no-constraints", action="store_true", help="Plain posterior draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--compress", action="store_true")

    p = sub.add_parser("experiment", help="Run a full experiment grid")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--n-datasets", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--progress", action="store_true")

    p = sub.add_parser("plot", help="Histogram of per-dataset metrics")
    p.add_argument("--metrics", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--column", default="q_star_metric")
    p.add_argument("--methods", help="Comma-separated methods (default: all)")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--episodes", type=int)
    p.add_argument("--bins", type=int, default=20)

    p = sub.add_parser("serve", help="Serve experiment results over HTTP")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--results-root", type=Path)

    p = sub.add_parser("cache", help="Inspect or clear the result cache")
    p.add_argument("--stats", action="store_true")
    p.add_argument("--clear", action="store_true")
    p.add_argument("--cleanup", type=int, metavar="SECONDS", help="Remove entries older than SECONDS")
    p.add_argument("--cache-dir", type=Path)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "ball_source", None):
        args.ball_source = args.ball_source.replace("-", "_")

    try:
        cli = BayesItlCLI()
        errors = cli.config.validate()
        if errors:
            raise ConfigError("; ".join(errors))
        return getattr(cli, args.command.replace("-", "_"))(args)
    except ValidationError as e:
        print(f"Invalid configuration:\n{e}", file=sys.stderr)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
    except ItlError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
    except json.JSONDecodeError as e:
        print(f"Malformed JSON input: {e}", file=sys.stderr)
    except (KeyError, ValueError) as e:
        print(f"Invalid input: {e}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    # Configure logging for standalone script execution only
    root_logger = logging.getLogger()
    for h in list(root_logger.handlers):
        root_logger.removeHandler(h)
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    sys.exit(main())
