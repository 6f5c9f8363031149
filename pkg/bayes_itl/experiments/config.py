#!/usr/bin/env python3
"""
Experiment Configuration

Validated description of one experiment run: where the true environment
comes from, the (epsilon, K) grid, the dataset and sample protocol, and the
sampler settings. Files may be JSON or YAML.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..core import document_hash
from ..errors import ConfigError

METHODS = ("mle", "posterior", "constrained")


class SamplerSettings(BaseModel):
    """Constrained sampler knobs"""

    model_config = ConfigDict(extra="forbid")

    anchor_mode: Literal["mle", "sample"] = "mle"
    ball_source: Literal["q_star", "q_expert"] = "q_star"
    equality_mode: Literal["pin", "tolerance"] = "pin"
    max_row_draws: int = Field(50_000, ge=1)
    max_outer_rounds: int = Field(20, ge=1)
    draw_block: int = Field(256, ge=1)
    gap_factor: float = Field(1.25, ge=1.0)
    window_factor: float = Field(0.8, gt=0.0, le=1.0)
    delta_floor: float = Field(1e-6, gt=0.0)
    margin_tol: float = Field(1e-9, ge=0.0)

    @field_validator("ball_source", mode="before")
    @classmethod
    def _normalize_ball_source(cls, value):
        return value.replace("-", "_") if isinstance(value, str) else value


class ExperimentConfig(BaseModel):
    """
    One experiment: environment source, grid and protocol

    The environment is read from env_path when given; otherwise it is the
    first generated instance (from env_spec, searching seeds upward) whose
    stochastic-state counts match targets.
    """

    model_config = ConfigDict(extra="forbid")

    env_path: Optional[str] = None
    env_spec: Dict[str, Any] = Field(default_factory=dict)
    targets: Dict[float, int] = Field(default_factory=lambda: {0.0: 0, 3.0: 3, 4.0: 6})
    max_tries: int = Field(100_000, ge=1)

    epsilons: List[float] = Field(default_factory=lambda: [0.0, 3.0, 4.0], min_length=1)
    episode_counts: List[int] = Field(default_factory=lambda: [15, 300], min_length=1)
    horizon: int = Field(20, ge=1)
    n_datasets: int = Field(1000, ge=1)
    n_posterior_samples: int = Field(1000, ge=1)
    master_seed: int = Field(0, ge=0, lt=2 ** 64)
    methods: List[Literal["mle", "posterior", "constrained"]] = Field(
        default_factory=lambda: list(METHODS), min_length=1
    )
    prior_concentration: float = Field(1.0, gt=0.0)
    sampler: SamplerSettings = Field(default_factory=SamplerSettings)
    max_flag_fraction: float = Field(0.01, ge=0.0, le=1.0)
    out_dir: Optional[str] = None
    progress: bool = False

    @field_validator("epsilons")
    @classmethod
    def _check_epsilons(cls, values: List[float]) -> List[float]:
        if any(e < 0 for e in values):
            raise ValueError("epsilons must be non-negative")
        if len(set(values)) != len(values):
            raise ValueError("epsilons must be distinct")
        return values

    @field_validator("episode_counts")
    @classmethod
    def _check_episode_counts(cls, values: List[int]) -> List[int]:
        if any(k < 1 for k in values):
            raise ValueError("episode counts must be positive")
        if len(set(values)) != len(values):
            raise ValueError("episode counts must be distinct")
        return values

    @field_validator("methods")
    @classmethod
    def _check_methods(cls, values: List[str]) -> List[str]:
        if len(set(values)) != len(values):
            raise ValueError("methods must be distinct")
        return values

    @model_validator(mode="after")
    def _check_targets(self):
        if self.env_path is None and not self.targets:
            raise ValueError("targets are required when no env_path is given")
        return self

    @classmethod
    def from_config(cls, config, **overrides) -> "ExperimentConfig":
        """Defaults taken from the toolkit Config sections"""
        fields = {
            "env_spec": {name: config.get(f"env.{name}") for name in (
                "n_decision_states", "n_actions", "discount", "skew_mix", "skew_concentration",
                "flat_concentration", "reward_low", "reward_high", "reward_mode", "seed",
            ) if config.get(f"env.{name}") is not None},
            "targets": {float(e): int(c) for e, c in config.get("env.reference_targets", {}).items()},
            "max_tries": config.get("env.max_tries", 100_000),
            "epsilons": config.get("experiment.epsilons", [0.0, 3.0, 4.0]),
            "episode_counts": config.get("experiment.episode_counts", [15, 300]),
            "horizon": config.get("data.horizon", 20),
            "n_datasets": config.get("experiment.n_datasets", 1000),
            "n_posterior_samples": config.get("experiment.n_posterior_samples", 1000),
            "methods": config.get("experiment.methods", list(METHODS)),
            "prior_concentration": config.get("posterior.prior_concentration", 1.0),
            "sampler": config.get("sampler", {}),
            "max_flag_fraction": config.get("experiment.max_flag_fraction", 0.01),
            "progress": config.get("experiment.progress", False),
        }
        fields.update(overrides)
        return cls(**fields)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        """
        Load a JSON or YAML experiment document

        Raises:
            ConfigError: unreadable file or unparseable document
            pydantic.ValidationError: invalid values
        """
        path = Path(path)
        try:
            with open(path, "r") as f:
                if path.suffix.lower() in (".yaml", ".yml"):
                    document = yaml.safe_load(f)
                else:
                    document = json.load(f)
        except (OSError, json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read experiment config {path}: {e}")

        if not isinstance(document, dict):
            raise ConfigError(f"experiment config {path} must be a mapping")
        return cls(**document)

    def to_document(self) -> Dict[str, Any]:
        document = self.model_dump(mode="json")
        document["targets"] = {repr(float(e)): c for e, c in sorted(self.targets.items())}
        return document

    def config_hash(self) -> str:
        """Content hash of the settings that determine results"""
        document = self.to_document()
        for key in ("out_dir", "progress"):
            document.pop(key, None)
        return document_hash(document)
