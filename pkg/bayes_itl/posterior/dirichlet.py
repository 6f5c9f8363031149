#!/usr/bin/env python3
"""
Dirichlet-Multinomial Transition Posterior

Each (s, a) row of T has an independent Dirichlet posterior with
concentration alpha = N[s, a, :] + prior. The posterior mean is T^MLE.

Row draws use numpy's Generator.standard_gamma (Marsaglia-Tsang) for one
Gamma(alpha_i, 1) variate per component, normalized by their sum.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..data import TrajectoryBatch
from ..errors import ContractViolation

logger = logging.getLogger("BayesITL.Posterior")


@dataclass(frozen=True, eq=False)
class DirichletPosterior:
    """
    Posterior concentrations over every transition row

    Attributes:
        alpha: Tensor (s, a, s') of positive concentrations
        terminal: Terminal index; its rows stay absorbing in means and samples
    """

    alpha: np.ndarray
    terminal: Optional[int] = None

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=np.float64, copy=True)
        if alpha.ndim != 3 or alpha.shape[0] != alpha.shape[2]:
            raise ContractViolation(f"alpha must have shape (S, A, S), got {alpha.shape}")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0.0):
            raise ContractViolation("alpha entries must be positive and finite")
        if self.terminal is not None and not 0 <= self.terminal < alpha.shape[0]:
            raise ContractViolation(f"terminal index {self.terminal} out of range")
        alpha.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)

    @property
    def n_states(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_actions(self) -> int:
        return self.alpha.shape[1]

    def is_terminal(self, state: int) -> bool:
        return self.terminal is not None and state == self.terminal

    def _absorbing_row(self) -> np.ndarray:
        row = np.zeros(self.n_states)
        row[self.terminal] = 1.0
        return row


def fit_posterior(data: Union[TrajectoryBatch, np.ndarray], prior_concentration: float = 1.0,
                  terminal: Optional[int] = None) -> DirichletPosterior:
    """
    alpha(s, a, .) = counts(s, a, .) + prior_concentration

    Args:
        data: Batch, or a raw counts tensor (s, a, s')
        prior_concentration: Symmetric Dirichlet prior weight (> 0)
        terminal: Terminal index (default: taken from the batch metadata)

    Returns:
        DirichletPosterior
    """
    if prior_concentration <= 0:
        raise ContractViolation("prior_concentration must be positive")

    if isinstance(data, TrajectoryBatch):
        counts = data.counts
        if terminal is None:
            terminal = data.metadata.get("terminal")
    else:
        counts = np.asarray(data)
        if np.any(counts < 0):
            raise ContractViolation("counts must be non-negative")

    return DirichletPosterior(counts + float(prior_concentration),
                              None if terminal is None else int(terminal))


def posterior_mean(post: DirichletPosterior) -> np.ndarray:
    """Normalized concentrations; this is T^MLE"""
    mean = post.alpha / post.alpha.sum(axis=2, keepdims=True)
    if post.terminal is not None:
        mean[post.terminal] = post._absorbing_row()
    return mean


def _check_indices(post: DirichletPosterior, state: int, action: int) -> None:
    if not (0 <= state < post.n_states and 0 <= action < post.n_actions):
        raise ContractViolation(f"({state}, {action}) out of range for ({post.n_states}, {post.n_actions})")


def sample_rows(post: DirichletPosterior, state: int, action: int,
                rng: np.random.Generator, size: int) -> np.ndarray:
    """
    Independent Dirichlet(alpha(s, a, .)) draws

    Returns:
        Array (size, S) of probability vectors
    """
    _check_indices(post, state, action)
    if post.is_terminal(state):
        return np.tile(post._absorbing_row(), (size, 1))

    alpha = post.alpha[state, action]
    draws = rng.standard_gamma(alpha, size=(size, alpha.size))
    totals = draws.sum(axis=1, keepdims=True)

    # All components can underflow to zero for very small concentrations
    empty = totals[:, 0] == 0.0
    if np.any(empty):
        draws[empty] = 0.0
        draws[empty, int(np.argmax(alpha))] = 1.0
        totals[empty] = 1.0

    rows = draws / totals
    return rows / rows.sum(axis=1, keepdims=True)


def sample_row(post: DirichletPosterior, state: int, action: int, rng: np.random.Generator) -> np.ndarray:
    """One exact Dirichlet(alpha(s, a, .)) draw"""
    return sample_rows(post, state, action, rng, 1)[0]


def sample_full(post: DirichletPosterior, rng: np.random.Generator) -> np.ndarray:
    """Independent draws for every (s, a), in row-major order"""
    transitions = np.empty_like(post.alpha)
    for state in range(post.n_states):
        for action in range(post.n_actions):
            transitions[state, action] = sample_row(post, state, action, rng)
    return transitions
