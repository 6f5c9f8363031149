#!/usr/bin/env python3
"""
Environment Generator

Randomized ground-truth MDPs with a mix of near-uniform and skewed transition
rows, their epsilon-ball structure, and a seed search for instances with a
requested number of stochastic-policy states.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..cache import CacheManager
from ..core import (
    PlanningOptions,
    StateKind,
    TabularMdp,
    build_expert_policy,
    classify_states,
    epsilon_ball,
)
from ..errors import ConfigError, ContractViolation, StructureSearchError

logger = logging.getLogger("BayesITL.EnvGenerator")

SEED_MODULUS = 2 ** 64


class EnvSpec(BaseModel):
    """Parameters of the random environment family"""

    model_config = ConfigDict(frozen=True)

    n_decision_states: int = Field(15, ge=2)
    n_actions: int = Field(6, ge=2)
    discount: float = Field(0.95, gt=0.0, lt=1.0)
    skew_mix: float = Field(0.5, ge=0.0, le=1.0)
    skew_concentration: float = Field(0.3, gt=0.0)
    flat_concentration: float = Field(20.0, gt=0.0)
    reward_low: float = 0.0
    reward_high: Optional[float] = None
    reward_mode: Literal["state_action", "action"] = "state_action"
    seed: int = Field(0, ge=0, lt=SEED_MODULUS)

    @model_validator(mode="before")
    @classmethod
    def _default_reward_high(cls, values):
        # Reward range scales with the number of states unless given
        if isinstance(values, dict) and values.get("reward_high") is None:
            values = dict(values)
            values["reward_high"] = float(values.get("n_decision_states", 15))
        return values

    @model_validator(mode="after")
    def _check_reward_range(self):
        if not self.reward_low < self.reward_high:
            raise ValueError("reward_low must be below reward_high")
        return self

    @classmethod
    def from_config(cls, config, **overrides) -> "EnvSpec":
        fields = {name: config.get(f"env.{name}") for name in cls.model_fields
                  if config.get(f"env.{name}") is not None}
        fields.update(overrides)
        return cls(**fields)


@dataclass(frozen=True)
class EnvDescription:
    """Stochastic-policy state counts per epsilon and the range of Q*"""

    epsilon_to_stochastic_count: Dict[float, int]
    q_star_range: Tuple[float, float]

    def to_document(self) -> Dict:
        return {
            "epsilon_to_stochastic_count": {repr(float(e)): c for e, c in self.epsilon_to_stochastic_count.items()},
            "q_star_range": list(self.q_star_range),
        }


def generate_env(spec: EnvSpec) -> TabularMdp:
    """
    Draw a ground-truth MDP from the environment family

    Each decision (s, a) row is drawn from a symmetric Dirichlet over all
    states (terminal included): with probability skew_mix at skew_concentration,
    otherwise at flat_concentration. Rewards are uniform on
    [reward_low, reward_high], per (s, a) or per action depending on reward_mode.

    Args:
        spec: Environment parameters including the seed

    Returns:
        Validated TabularMdp whose last state is the terminal
    """
    rng = np.random.default_rng(spec.seed)
    n_decision, n_actions = spec.n_decision_states, spec.n_actions
    n_states = n_decision + 1
    terminal = n_decision

    transitions = np.zeros((n_states, n_actions, n_states))
    for s in range(n_decision):
        for a in range(n_actions):
            skewed = rng.random() < spec.skew_mix
            concentration = spec.skew_concentration if skewed else spec.flat_concentration
            row = rng.dirichlet(np.full(n_states, concentration))
            transitions[s, a] = row / row.sum()
    transitions[terminal, :, terminal] = 1.0

    rewards = np.zeros((n_states, n_actions))
    if spec.reward_mode == "action":
        rewards[:n_decision] = rng.uniform(spec.reward_low, spec.reward_high, size=n_actions)
    else:
        rewards[:n_decision] = rng.uniform(spec.reward_low, spec.reward_high, size=(n_decision, n_actions))

    return TabularMdp(
        n_states=n_states,
        n_actions=n_actions,
        transitions=transitions,
        rewards=rewards,
        discount=spec.discount,
        terminal=terminal,
    )


def describe_env(mdp: TabularMdp, epsilons: Sequence[float],
                 options: Optional[PlanningOptions] = None) -> EnvDescription:
    """
    Count stochastic-policy states of the epsilon-optimal expert at each epsilon

    Args:
        mdp: Ground-truth MDP
        epsilons: Non-empty list of non-negative ball radii
        options: Planning settings

    Returns:
        EnvDescription
    """
    if not len(epsilons):
        raise ContractViolation("epsilons must not be empty")
    if any(e < 0 for e in epsilons):
        raise ContractViolation("epsilons must be non-negative")

    options = options or PlanningOptions()
    _, q_star, _ = options.plan(mdp)

    counts = {}
    for epsilon in epsilons:
        expert = build_expert_policy(epsilon_ball(q_star, epsilon))
        kinds = classify_states(expert, terminal=mdp.terminal)
        counts[float(epsilon)] = sum(1 for kind in kinds.values() if kind is StateKind.STOCHASTIC)

    decision_q = q_star.q[mdp.decision_states]
    return EnvDescription(
        epsilon_to_stochastic_count=counts,
        q_star_range=(float(decision_q.min()), float(decision_q.max())),
    )


def _search_params(spec: EnvSpec, targets: Mapping[float, int], max_tries: int) -> Dict:
    return {
        "spec": spec.model_dump(),
        "targets": {repr(float(e)): int(c) for e, c in sorted(targets.items())},
        "max_tries": max_tries,
    }


def _matches(description: EnvDescription, targets: Mapping[float, int]) -> bool:
    counts = description.epsilon_to_stochastic_count
    return all(counts[float(e)] == c for e, c in targets.items())


def find_env_with_structure(spec: EnvSpec,
                            targets: Mapping[float, int],
                            max_tries: int,
                            options: Optional[PlanningOptions] = None,
                            cache: Optional[CacheManager] = None) -> TabularMdp:
    """
    Search consecutive seeds for an environment with the target structure

    Args:
        spec: Starting spec; seeds spec.seed, spec.seed + 1, ... are tried
        targets: Map epsilon -> required number of stochastic-policy states
        max_tries: Number of seeds to try
        options: Planning settings
        cache: Optional cache remembering the matching seed

    Returns:
        First matching TabularMdp

    Raises:
        StructureSearchError: no match within max_tries
    """
    if max_tries < 1:
        raise ContractViolation("max_tries must be at least 1")
    if not targets:
        raise ContractViolation("targets must not be empty")

    epsilons = sorted(float(e) for e in targets)
    params = _search_params(spec, targets, max_tries)

    if cache is not None:
        cached = cache.get("find_env_with_structure", params)
        if cached is not None:
            seed = cached.get("seed") if isinstance(cached, dict) else None
            if isinstance(seed, int) and 0 <= seed < SEED_MODULUS:
                mdp = generate_env(spec.model_copy(update={"seed": seed}))
                if _matches(describe_env(mdp, epsilons, options), targets):
                    logger.info(f"Using cached structure search result (seed {seed})")
                    return mdp
                logger.warning(f"Cached seed {seed} no longer has the target structure; searching again")
            else:
                logger.warning(f"Malformed cached structure search result {cached!r}; searching again")
            cache.invalidate("find_env_with_structure", params)

    closest_seed, closest_counts, closest_distance = None, {}, None

    for attempt in range(max_tries):
        seed = (spec.seed + attempt) % SEED_MODULUS
        mdp = generate_env(spec.model_copy(update={"seed": seed}))
        description = describe_env(mdp, epsilons, options)

        if _matches(description, targets):
            logger.info(f"Found environment with structure {dict(targets)} at seed {seed} "
                        f"after {attempt + 1} tries")
            if cache is not None:
                cache.set("find_env_with_structure", {"seed": seed}, params,
                          {"fingerprint": mdp.fingerprint})
            return mdp

        counts = description.epsilon_to_stochastic_count
        distance = sum(abs(counts[float(e)] - c) for e, c in targets.items())
        if closest_distance is None or distance < closest_distance:
            closest_seed, closest_counts, closest_distance = seed, dict(counts), distance

        if (attempt + 1) % 1000 == 0:
            logger.debug(f"Structure search: {attempt + 1} seeds tried, closest {closest_counts}")

    raise StructureSearchError(dict(targets), closest_seed, closest_counts, max_tries)


def parse_targets(text: str) -> Dict[float, int]:
    """Parse 'eps:count,eps:count' into a target map"""
    targets = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        try:
            epsilon, count = item.split(":")
            targets[float(epsilon)] = int(count)
        except ValueError:
            raise ContractViolation(f"invalid target '{item}', expected eps:count")
    return targets


def reference_targets(config) -> Dict[float, int]:
    raw = config.get("env.reference_targets", {"0": 0, "3": 3, "4": 6})
    return {float(e): int(c) for e, c in raw.items()}


def reference_env(config=None, cache: Optional[CacheManager] = None) -> TabularMdp:
    """
    The repository reference instance

    The environment of the 15-state family at the pinned env.reference_seed,
    checked against env.reference_fingerprint and the configured reference
    structure (by default 0, 3 and 6 stochastic-policy states at epsilon 0, 3
    and 4). Without a pinned seed, the first matching seed counting up from
    env.seed is searched for and cached.

    Raises:
        ConfigError: the pinned seed no longer produces the recorded instance
    """
    from ..cache import get_cache_manager
    from ..config import get_config

    config = config or get_config()
    spec = EnvSpec.from_config(config)
    targets = reference_targets(config)
    options = PlanningOptions.from_config(config)

    pinned_seed = config.get("env.reference_seed")
    if pinned_seed is not None:
        mdp = generate_env(spec.model_copy(update={"seed": int(pinned_seed)}))
        expected = config.get("env.reference_fingerprint")
        if expected and mdp.fingerprint != expected:
            raise ConfigError(f"reference seed {pinned_seed} produced environment {mdp.fingerprint}, "
                              f"expected {expected}")
        description = describe_env(mdp, sorted(targets), options)
        if not _matches(description, targets):
            raise ConfigError(f"reference seed {pinned_seed} has structure "
                              f"{description.epsilon_to_stochastic_count}, expected {targets}")
        return mdp

    if cache is None and config.get("cache.enabled", True):
        cache = get_cache_manager()

    return find_env_with_structure(
        spec,
        targets,
        max_tries=int(config.get("env.max_tries", 100000)),
        options=options,
        cache=cache,
    )
