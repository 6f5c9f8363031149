#!/usr/bin/env python3
"""
Tabular MDP Types

Immutable containers for an MDP instance, policies, value tables and
epsilon-ball maps, plus the JSON document format for MDPs.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, FrozenSet, Mapping, Sequence, Union

import numpy as np

from ..errors import ContractViolation

logger = logging.getLogger("BayesITL.MDP")

ROW_SUM_TOL = 1e-12


def _frozen_array(values: Any, ndim: int, name: str) -> np.ndarray:
    """Copy into a read-only float64 array of the given rank"""
    array = np.array(values, dtype=np.float64, copy=True)
    if array.ndim != ndim:
        raise ContractViolation(f"{name} must have {ndim} dimensions, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ContractViolation(f"{name} contains non-finite entries")
    array.flags.writeable = False
    return array


def check_stochastic_rows(rows: np.ndarray, name: str, tol: float = ROW_SUM_TOL) -> None:
    """Raise unless every last-axis row is a probability vector"""
    if np.any(rows < 0.0):
        raise ContractViolation(f"{name} has negative entries")
    worst = np.max(np.abs(rows.sum(axis=-1) - 1.0)) if rows.size else 0.0
    if worst > tol:
        raise ContractViolation(f"{name} rows do not sum to 1 (worst deviation {worst:.3e})")


@dataclass(frozen=True, eq=False)
class Policy:
    """Row-stochastic state -> action distribution table"""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen_array(self.probs, 2, "policy")
        check_stochastic_rows(probs, "policy")
        object.__setattr__(self, "probs", probs)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    def support(self, state: int) -> FrozenSet[int]:
        """Actions taken with positive probability at a state"""
        return frozenset(int(a) for a in np.flatnonzero(self.probs[state] > ROW_SUM_TOL))

    @property
    def support_mask(self) -> np.ndarray:
        return self.probs > ROW_SUM_TOL

    @classmethod
    def one_hot(cls, actions: Sequence[int], n_actions: int) -> "Policy":
        """Deterministic policy choosing actions[s] at each state"""
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((actions.size, n_actions))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "Policy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))


@dataclass(frozen=True, eq=False)
class ValueTable:
    """State values V"""

    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", _frozen_array(self.v, 1, "value table"))


@dataclass(frozen=True, eq=False)
class QTable:
    """Action values Q indexed (s, a)"""

    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen_array(self.q, 2, "Q table"))

    def greedy_actions(self) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. the lowest action index
        return np.argmax(self.q, axis=1)


@dataclass(frozen=True)
class EpsilonBallMap:
    """Per-state sets of actions within epsilon of the best action value"""

    balls: Mapping[int, FrozenSet[int]]
    epsilon: float
    n_actions: int

    def __post_init__(self):
        if self.epsilon < 0:
            raise ContractViolation("epsilon must be non-negative")
        for state, ball in self.balls.items():
            if not ball:
                raise ContractViolation(f"ball at state {state} is empty")

    def ball(self, state: int) -> FrozenSet[int]:
        return self.balls[state]


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """
    Finite MDP with a single absorbing, zero-reward terminal state

    Attributes:
        n_states: Number of states, terminal included
        n_actions: Number of actions
        transitions: Tensor T[s, a, s']
        rewards: Table R[s, a]
        discount: Discount factor in (0, 1)
        terminal: Index of the terminal state
    """

    n_states: int
    n_actions: int
    transitions: np.ndarray
    rewards: np.ndarray
    discount: float
    terminal: int

    def __post_init__(self):
        transitions = _frozen_array(self.transitions, 3, "transitions")
        rewards = _frozen_array(self.rewards, 2, "rewards")
        n_states, n_actions = int(self.n_states), int(self.n_actions)

        if n_states < 1 or n_actions < 1:
            raise ContractViolation("n_states and n_actions must be positive")
        if transitions.shape != (n_states, n_actions, n_states):
            raise ContractViolation(
                f"transitions shape {transitions.shape} does not match ({n_states}, {n_actions}, {n_states})"
            )
        if rewards.shape != (n_states, n_actions):
            raise ContractViolation(f"rewards shape {rewards.shape} does not match ({n_states}, {n_actions})")
        if not 0.0 < float(self.discount) < 1.0:
            raise ContractViolation(f"discount must lie in (0, 1), got {self.discount}")
        if not 0 <= int(self.terminal) < n_states:
            raise ContractViolation(f"terminal index {self.terminal} out of range")

        check_stochastic_rows(transitions, "transitions")

        terminal = int(self.terminal)
        if not np.all(transitions[terminal, :, terminal] == 1.0):
            raise ContractViolation("terminal state must be absorbing")
        if not np.all(rewards[terminal] == 0.0):
            raise ContractViolation("terminal state must have zero reward")

        object.__setattr__(self, "n_states", n_states)
        object.__setattr__(self, "n_actions", n_actions)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "terminal", terminal)

    @property
    def decision_states(self) -> np.ndarray:
        """All states except the terminal"""
        return np.array([s for s in range(self.n_states) if s != self.terminal], dtype=int)

    def check_policy(self, policy: Policy) -> None:
        if policy.probs.shape != (self.n_states, self.n_actions):
            raise ContractViolation(
                f"policy shape {policy.probs.shape} does not match MDP ({self.n_states}, {self.n_actions})"
            )

    def policy_transitions(self, policy: Policy) -> np.ndarray:
        """T_pi(s, s') = sum_a pi(a|s) T(s, a, s')"""
        self.check_policy(policy)
        return np.einsum("sa,sat->st", policy.probs, self.transitions)

    def policy_rewards(self, policy: Policy) -> np.ndarray:
        """R_pi(s) = sum_a pi(a|s) R(s, a)"""
        self.check_policy(policy)
        return np.einsum("sa,sa->s", policy.probs, self.rewards)

    def with_transitions(self, transitions: np.ndarray) -> "TabularMdp":
        """Same rewards and discount under other dynamics"""
        return TabularMdp(
            n_states=self.n_states,
            n_actions=self.n_actions,
            transitions=transitions,
            rewards=self.rewards,
            discount=self.discount,
            terminal=self.terminal,
        )

    def to_document(self) -> Dict[str, Any]:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "discount": self.discount,
            "terminal": self.terminal,
            "transitions": self.transitions.tolist(),
            "rewards": self.rewards.tolist(),
        }

    @classmethod
    def from_document(cls, document: Mapping[str, Any]) -> "TabularMdp":
        """Build an MDP from its JSON document, re-validating every invariant"""
        missing = [k for k in ("n_states", "n_actions", "discount", "terminal", "transitions", "rewards")
                   if k not in document]
        if missing:
            raise ContractViolation(f"MDP document missing fields: {missing}")
        return cls(
            n_states=document["n_states"],
            n_actions=document["n_actions"],
            transitions=document["transitions"],
            rewards=document["rewards"],
            discount=document["discount"],
            terminal=document["terminal"],
        )

    @cached_property
    def fingerprint(self) -> str:
        """Content hash of the canonical JSON document"""
        return document_hash(self.to_document())


def document_hash(document: Any) -> str:
    """md5 of a JSON document serialized with sorted keys"""
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.md5(canonical.encode()).hexdigest()


def save_mdp(mdp: TabularMdp, path: Union[str, Path]) -> Path:
    """Write an MDP JSON document"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(mdp.to_document(), f)
    logger.debug(f"Wrote MDP {mdp.fingerprint} to {path}")
    return path


def load_mdp(path: Union[str, Path]) -> TabularMdp:
    """Read and validate an MDP JSON document"""
    with open(path, "r") as f:
        document = json.load(f)
    return TabularMdp.from_document(document)
