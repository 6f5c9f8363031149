#!/usr/bin/env python3
"""
Expert Rollouts

Simulates the expert policy in the true environment to produce offline
batches of trajectories and their transition counts N[s, a, s'].
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..core import Policy, TabularMdp
from ..errors import ContractViolation

logger = logging.getLogger("BayesITL.Rollout")

SEED_MASK = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
DEFAULT_HORIZON = 20


class Step(NamedTuple):
    state: int
    action: int
    reward: float
    next_state: int


@dataclass(frozen=True)
class Trajectory:
    """One episode; consecutive steps chain through next_state"""

    steps: Tuple[Step, ...]

    def __post_init__(self):
        steps = tuple(Step(int(s), int(a), float(r), int(n)) for s, a, r, n in self.steps)
        for previous, current in zip(steps, steps[1:]):
            if previous.next_state != current.state:
                raise ContractViolation("trajectory steps do not chain")
        object.__setattr__(self, "steps", steps)

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """
    Offline dataset D with its sufficient statistics

    Attributes:
        trajectories: Episodes in generation order
        counts: N[s, a, s'] tallied over every step
        visit_mask: True where (s, a) appears in the data
        metadata: Provenance (env hash, seed, episodes, horizon, shape)
    """

    trajectories: Tuple[Trajectory, ...]
    counts: np.ndarray
    visit_mask: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[Trajectory], n_states: int, n_actions: int,
                          metadata: Optional[Dict[str, Any]] = None) -> "TrajectoryBatch":
        counts = counts_from_trajectories(trajectories, n_states, n_actions)
        visit_mask = counts.sum(axis=2) > 0
        counts.flags.writeable = False
        visit_mask.flags.writeable = False
        metadata = dict(metadata or {})
        metadata.setdefault("n_states", n_states)
        metadata.setdefault("n_actions", n_actions)
        return cls(tuple(trajectories), counts, visit_mask, metadata)

    @property
    def n_states(self) -> int:
        return self.counts.shape[0]

    @property
    def n_actions(self) -> int:
        return self.counts.shape[1]

    @property
    def n_steps(self) -> int:
        return int(self.counts.sum())


def counts_from_trajectories(trajectories: Iterable[Trajectory], n_states: int, n_actions: int) -> np.ndarray:
    """
    Exact tally of (s, a, s') over every step

    Raises:
        ContractViolation: a step references an out-of-range index
    """
    counts = np.zeros((n_states, n_actions, n_states), dtype=np.int64)
    for trajectory in trajectories:
        for step in trajectory.steps:
            if not (0 <= step.state < n_states and 0 <= step.next_state < n_states
                    and 0 <= step.action < n_actions):
                raise ContractViolation(f"step {tuple(step)} out of range for ({n_states}, {n_actions})")
            counts[step.state, step.action, step.next_state] += 1
    return counts


def merge_batches(first: TrajectoryBatch, second: TrajectoryBatch) -> TrajectoryBatch:
    """Concatenate two batches; counts add elementwise"""
    if first.counts.shape != second.counts.shape:
        raise ContractViolation("cannot merge batches of different shapes")
    return TrajectoryBatch.from_trajectories(
        first.trajectories + second.trajectories, first.n_states, first.n_actions,
        {key: value for key, value in first.metadata.items() if key in ("n_states", "n_actions", "terminal")},
    )


def derive_dataset_seed(master_seed: int, index: int) -> int:
    """seed_i = master_seed XOR ((i + 1) * 0x9E3779B97F4A7C15) modulo 2^64"""
    return (int(master_seed) ^ (((int(index) + 1) * GOLDEN_GAMMA) & SEED_MASK)) & SEED_MASK


def rollout_batch(mdp: TabularMdp, expert: Policy, episodes: int,
                  horizon: int = DEFAULT_HORIZON, seed: int = 0) -> TrajectoryBatch:
    """
    Roll out the expert from uniformly random decision states

    Each episode stops at the terminal state or after `horizon` steps.

    Args:
        mdp: True environment
        expert: Behavior policy
        episodes: Number of episodes K (>= 1)
        horizon: Step cap per episode (>= 1)
        seed: Random seed; the batch is a pure function of its inputs

    Returns:
        TrajectoryBatch
    """
    if episodes < 1:
        raise ContractViolation("episodes must be at least 1")
    if horizon < 1:
        raise ContractViolation("horizon must be at least 1")
    mdp.check_policy(expert)

    rng = np.random.default_rng(seed)
    starts = mdp.decision_states
    trajectories: List[Trajectory] = []

    for _ in range(episodes):
        state = int(starts[rng.integers(starts.size)])
        steps = []
        for _ in range(horizon):
            action = int(rng.choice(mdp.n_actions, p=expert.probs[state]))
            next_state = int(rng.choice(mdp.n_states, p=mdp.transitions[state, action]))
            steps.append(Step(state, action, float(mdp.rewards[state, action]), next_state))
            if next_state == mdp.terminal:
                break
            state = next_state
        trajectories.append(Trajectory(tuple(steps)))

    metadata = {
        "env_hash": mdp.fingerprint,
        "seed": int(seed),
        "episodes": int(episodes),
        "horizon": int(horizon),
        "terminal": mdp.terminal,
    }
    return TrajectoryBatch.from_trajectories(trajectories, mdp.n_states, mdp.n_actions, metadata)


def _rollout_task(task: Tuple[TabularMdp, Policy, int, int, int, int]) -> TrajectoryBatch:
    mdp, expert, episodes, horizon, seed, index = task
    batch = rollout_batch(mdp, expert, episodes, horizon, seed)
    batch.metadata["dataset_index"] = index
    return batch


def rollout_datasets(mdp: TabularMdp, expert: Policy, episodes: int, horizon: int,
                     n_datasets: int, master_seed: int, jobs: int = 1) -> List[TrajectoryBatch]:
    """
    Independent batches D^(i) with derived seeds, in dataset order

    Results do not depend on `jobs`: each dataset's seed is derived from its index.
    """
    tasks = [(mdp, expert, episodes, horizon, derive_dataset_seed(master_seed, i), i)
             for i in range(n_datasets)]

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            return list(executor.map(_rollout_task, tasks))

    return [_rollout_task(task) for task in tasks]
