#!/usr/bin/env python3
"""
Constrained Rejection Sampler

Draws transition tensors from P(T | D, expert): every row is redrawn from its
Dirichlet posterior until the row constraint against the anchor holds, and
the assembled candidate is accepted only if it reproduces the expert's
epsilon-balls. Failed candidates tighten the per-state bounds before the
next round.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple

import numpy as np
from tqdm import tqdm

from ..core import PlanningOptions, StateKind, classify_states
from ..errors import ContractViolation, OuterRoundLimitError, RowDrawLimitError
from ..posterior import DirichletPosterior, sample_full, sample_rows
from .constraints import (
    MARGIN_TOL,
    BallSource,
    ConstraintContext,
    parse_mode,
    ball_mismatches,
    constraint_values,
    margin_violations,
)


class EqualityMode(str, Enum):
    PIN = "pin"
    TOLERANCE = "tolerance"


@dataclass(frozen=True)
class SamplerLimits:
    max_row_draws: int = 50_000
    max_outer_rounds: int = 20
    draw_block: int = 256

    def __post_init__(self):
        if self.max_row_draws < 1 or self.max_outer_rounds < 1 or self.draw_block < 1:
            raise ContractViolation("sampler limits must be positive")

    @classmethod
    def from_config(cls, config) -> "SamplerLimits":
        return cls(
            max_row_draws=int(config.get("sampler.max_row_draws", 50_000)),
            max_outer_rounds=int(config.get("sampler.max_outer_rounds", 20)),
            draw_block=int(config.get("sampler.draw_block", 256)),
        )


@dataclass(frozen=True)
class DeltaTuning:
    gap_factor: float = 1.25
    window_factor: float = 0.8
    delta_floor: float = 1e-6

    def __post_init__(self):
        if self.gap_factor < 1.0 or not 0.0 < self.window_factor <= 1.0 or self.delta_floor <= 0.0:
            raise ContractViolation("gap_factor must be >= 1, window_factor in (0, 1], delta_floor > 0")

    @classmethod
    def from_config(cls, config) -> "DeltaTuning":
        return cls(
            gap_factor=float(config.get("sampler.gap_factor", 1.25)),
            window_factor=float(config.get("sampler.window_factor", 0.8)),
            delta_floor=float(config.get("sampler.delta_floor", 1e-6)),
        )


@dataclass(frozen=True, eq=False)
class DeltaTable:
    """
    Per-(s, a) bounds: delta_gap for never-taken actions, delta_window for
    supported actions at stochastic-policy states. Strictly positive.
    """

    delta_gap: np.ndarray
    delta_window: np.ndarray

    def __post_init__(self):
        for name in ("delta_gap", "delta_window"):
            values = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if values.ndim != 2 or np.any(values <= 0.0) or not np.all(np.isfinite(values)):
                raise ContractViolation(f"{name} must be a strictly positive (s, a) table")
            values.flags.writeable = False
            object.__setattr__(self, name, values)

    @classmethod
    def initial(cls, n_states: int, n_actions: int, epsilon: float, floor: float = 1e-6) -> "DeltaTable":
        start = max(float(epsilon), floor)
        return cls(np.full((n_states, n_actions), start), np.full((n_states, n_actions), start))

    def tuned(self, gap_states: Iterable[int], window_states: Iterable[int],
              tuning: DeltaTuning) -> "DeltaTable":
        """Widen the gap at intruded states and narrow the window where actions dropped out"""
        gap, window = self.delta_gap.copy(), self.delta_window.copy()
        gap[sorted(set(gap_states))] *= tuning.gap_factor
        window[sorted(set(window_states))] *= tuning.window_factor
        return DeltaTable(gap, window)

    def to_document(self) -> Dict[str, Any]:
        return {"delta_gap": self.delta_gap.tolist(), "delta_window": self.delta_window.tolist()}


@dataclass
class ItlSampleSet:
    """
    Accepted samples with run diagnostics

    Attributes:
        samples: Accepted transition tensors
        accepted: Number of accepted samples
        outer_rounds_used: Candidates assembled in total (accepted and rejected)
        final_deltas: Bounds in force when the run finished
        per_row_draw_counts: Row draws spent per (s, a) over the whole run
    """

    samples: List[np.ndarray]
    accepted: int
    outer_rounds_used: int
    final_deltas: DeltaTable
    per_row_draw_counts: np.ndarray
    rejected_rounds: int = 0
    failure_counts: Dict[str, int] = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.outer_rounds_used if self.outer_rounds_used else 0.0

    def diagnostics(self) -> Dict[str, Any]:
        return {
            "accepted": self.accepted,
            "outer_rounds_used": self.outer_rounds_used,
            "rejected_rounds": self.rejected_rounds,
            "acceptance_rate": self.acceptance_rate,
            "failure_counts": dict(self.failure_counts),
            "per_row_draw_counts": self.per_row_draw_counts.tolist(),
        }

    def to_document(self, include_samples: bool = True) -> Dict[str, Any]:
        document = {
            "diagnostics": self.diagnostics(),
            "final_deltas": self.final_deltas.to_document(),
        }
        if include_samples:
            document["samples"] = [sample.tolist() for sample in self.samples]
        return document


class ConstrainedSampler:
    """
    Rejection sampler for one dataset's constrained posterior

    Rows are handled per decision state in index order: never-taken actions
    must reach constraint >= delta_gap; the supported action of a
    deterministic state is pinned to its anchor row (or, in tolerance mode,
    redrawn until |constraint| <= tau); supported actions of stochastic
    states must land in [-delta_window, delta_window].
    """

    def __init__(self,
                 post: DirichletPosterior,
                 ctx: ConstraintContext,
                 rng: np.random.Generator,
                 limits: Optional[SamplerLimits] = None,
                 tuning: Optional[DeltaTuning] = None,
                 ball_source=BallSource.Q_STAR,
                 equality_mode=EqualityMode.PIN,
                 options: Optional[PlanningOptions] = None,
                 margin_tol: float = MARGIN_TOL):
        if post.alpha.shape != (ctx.n_states, ctx.n_actions, ctx.n_states):
            raise ContractViolation(
                f"posterior shape {post.alpha.shape} does not match context "
                f"({ctx.n_states}, {ctx.n_actions}, {ctx.n_states})"
            )
        self.logger = logging.getLogger("BayesITL.Sampler")
        self.post = post
        self.ctx = ctx
        self.rng = rng
        self.limits = limits or SamplerLimits()
        self.tuning = tuning or DeltaTuning()
        self.ball_source = parse_mode(BallSource, ball_source)
        self.equality_mode = parse_mode(EqualityMode, equality_mode)
        self.options = options or PlanningOptions()
        self.margin_tol = margin_tol

        self.equality_tol = max(0.05 * ctx.epsilon, self.tuning.delta_floor)
        self.kinds = classify_states(ctx.expert, terminal=ctx.terminal)
        self.support = ctx.expert.support_mask
        self.deltas = DeltaTable.initial(ctx.n_states, ctx.n_actions, ctx.epsilon, self.tuning.delta_floor)
        self.draw_counts = np.zeros((ctx.n_states, ctx.n_actions), dtype=np.int64)

    def _draw_row(self, state: int, action: int, low: float, high: float) -> np.ndarray:
        """First posterior draw whose constraint value lies in [low, high]"""
        draws = 0
        while draws < self.limits.max_row_draws:
            block = min(self.limits.draw_block, self.limits.max_row_draws - draws)
            rows = sample_rows(self.post, state, action, self.rng, block)
            values = constraint_values(self.ctx, rows, state, action)
            hits = np.flatnonzero((values >= low) & (values <= high))
            if hits.size:
                draws += int(hits[0]) + 1
                self.draw_counts[state, action] += int(hits[0]) + 1
                return rows[hits[0]]
            draws += block
            self.draw_counts[state, action] += block

        raise RowDrawLimitError(state, action, (low, high), draws)

    def draw_candidate(self) -> np.ndarray:
        """Assemble one candidate tensor satisfying every row constraint"""
        ctx = self.ctx
        candidate = np.zeros((ctx.n_states, ctx.n_actions, ctx.n_states))
        candidate[ctx.terminal, :, ctx.terminal] = 1.0

        for state in ctx.decision_states:
            deterministic = self.kinds[state] is StateKind.DETERMINISTIC
            for action in range(ctx.n_actions):
                if not self.support[state, action]:
                    low, high = self.deltas.delta_gap[state, action], np.inf
                elif deterministic and self.equality_mode is EqualityMode.PIN:
                    candidate[state, action] = ctx.anchor_rows[state, action]
                    continue
                elif deterministic:
                    low, high = -self.equality_tol, self.equality_tol
                else:
                    bound = self.deltas.delta_window[state, action]
                    low, high = -bound, bound
                candidate[state, action] = self._draw_row(state, action, low, high)

        return candidate

    def check_candidate(self, candidate: np.ndarray) -> Tuple[Set[int], Set[int]]:
        """(gap_states, window_states) that need tuning; both empty on acceptance"""
        ctx = self.ctx
        intruded, dropped = ball_mismatches(candidate, ctx.rewards, ctx.discount, ctx.epsilon, ctx.expert,
                                            self.ball_source, ctx.terminal, self.options)
        violations = margin_violations(candidate, ctx.rewards, ctx.discount, ctx.epsilon, ctx.expert,
                                      ctx.terminal, self.margin_tol)
        return intruded | {state for state, _ in violations}, dropped

    def run(self, n_samples: int, progress: bool = False) -> ItlSampleSet:
        """
        Draw n_samples accepted tensors

        Raises:
            RowDrawLimitError: a row found no admissible draw within max_row_draws
            OuterRoundLimitError: max_outer_rounds consecutive candidates were rejected
        """
        if n_samples < 1:
            raise ContractViolation("n_samples must be at least 1")

        samples: List[np.ndarray] = []
        rounds = rejected = 0
        failure_counts = {"gap": 0, "window": 0}

        for _ in tqdm(range(n_samples), desc="constrained samples", disable=not progress, leave=False):
            consecutive = 0
            while True:
                candidate = self.draw_candidate()
                rounds += 1
                gap_states, window_states = self.check_candidate(candidate)
                if not gap_states and not window_states:
                    candidate.flags.writeable = False
                    samples.append(candidate)
                    break

                rejected += 1
                consecutive += 1
                failure_counts["gap"] += len(gap_states)
                failure_counts["window"] += len(window_states)
                if consecutive >= self.limits.max_outer_rounds:
                    raise OuterRoundLimitError(self.deltas, gap_states | window_states, consecutive)

                self.deltas = self.deltas.tuned(gap_states, window_states, self.tuning)
                self.logger.debug(f"Candidate rejected (gap states {sorted(gap_states)}, "
                                  f"window states {sorted(window_states)}); deltas tuned")

        self.logger.debug(f"Accepted {len(samples)} samples in {rounds} rounds")
        return ItlSampleSet(
            samples=samples,
            accepted=len(samples),
            outer_rounds_used=rounds,
            final_deltas=self.deltas,
            per_row_draw_counts=self.draw_counts.copy(),
            rejected_rounds=rejected,
            failure_counts=failure_counts,
        )


def sample_constrained(post: DirichletPosterior,
                       ctx: ConstraintContext,
                       n_samples: int,
                       rng: np.random.Generator,
                       limits: Optional[SamplerLimits] = None,
                       tuning: Optional[DeltaTuning] = None,
                       ball_source=BallSource.Q_STAR,
                       equality_mode=EqualityMode.PIN,
                       enforce_constraints: bool = True,
                       options: Optional[PlanningOptions] = None,
                       progress: bool = False,
                       margin_tol: float = MARGIN_TOL) -> ItlSampleSet:
    """
    Samples from P(T | D, expert) by constrained rejection

    Args:
        post: Transition posterior
        ctx: Anchor context from build_context
        n_samples: Accepted samples to return (>= 1)
        rng: Random stream for every draw
        limits: Row-draw and outer-round caps
        tuning: Bound adjustment factors
        ball_source: 'q_star' plans each candidate optimally; 'q_expert' uses the expert's Q
        equality_mode: 'pin' or 'tolerance' handling of deterministic states
        enforce_constraints: False returns plain posterior draws without checks
        options: Planning settings for the ball check
        progress: Show a tqdm bar
        margin_tol: Slack of the never-taken margin check

    Returns:
        ItlSampleSet
    """
    if not enforce_constraints:
        if n_samples < 1:
            raise ContractViolation("n_samples must be at least 1")
        samples = [sample_full(post, rng) for _ in range(n_samples)]
        counts = np.zeros((post.n_states, post.n_actions), dtype=np.int64)
        counts[ctx.decision_states] = n_samples
        return ItlSampleSet(
            samples=samples,
            accepted=n_samples,
            outer_rounds_used=n_samples,
            final_deltas=DeltaTable.initial(post.n_states, post.n_actions, ctx.epsilon),
            per_row_draw_counts=counts,
        )

    sampler = ConstrainedSampler(post, ctx, rng, limits, tuning, ball_source, equality_mode, options, margin_tol)
    return sampler.run(n_samples, progress=progress)
