#!/usr/bin/env python3
"""
Expert Constraints

The anchor context every row constraint is evaluated against, the per-row
constraint value, and the whole-matrix acceptance checks (epsilon-ball
property and the never-taken action margin under the candidate dynamics).
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Set, Tuple

import numpy as np

from ..core import (
    PlanningOptions,
    Policy,
    TabularMdp,
    ValueTable,
    epsilon_ball,
    evaluate_policy_closed_form,
    q_from_v,
)
from ..errors import ContractViolation
from ..posterior import DirichletPosterior, posterior_mean, sample_full

MARGIN_TOL = 1e-9


class AnchorMode(str, Enum):
    MLE = "mle"
    SAMPLE = "sample"


class BallSource(str, Enum):
    Q_STAR = "q_star"
    Q_EXPERT = "q_expert"


def parse_mode(enum_cls, value):
    """Accept enum members or their CLI spellings ('q-star')"""
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(str(value).replace("-", "_"))
    except ValueError:
        choices = ", ".join(member.value for member in enum_cls)
        raise ContractViolation(f"invalid {enum_cls.__name__} '{value}', expected one of: {choices}")


@dataclass(frozen=True, eq=False)
class ConstraintContext:
    """
    Fixed anchor dynamics and expert values for one dataset

    Attributes:
        anchor_rows: Per-action rows (s, a, s') the anchor was mixed from
        anchor_T_pi: T_pi(s, s') = sum_a expert(a|s) anchor_rows(s, a, s')
        v_expert: Expert values solved against anchor_T_pi
        expert: Expert policy
        epsilon: Ball radius
        rewards: R(s, a)
        discount: Discount factor
        terminal: Terminal index
        anchor_mode: How anchor_rows were obtained
    """

    anchor_rows: np.ndarray
    anchor_T_pi: np.ndarray
    v_expert: ValueTable
    expert: Policy
    epsilon: float
    rewards: np.ndarray
    discount: float
    terminal: int
    anchor_mode: AnchorMode = AnchorMode.MLE

    @property
    def n_states(self) -> int:
        return self.anchor_T_pi.shape[0]

    @property
    def n_actions(self) -> int:
        return self.rewards.shape[1]

    @property
    def decision_states(self) -> List[int]:
        return [s for s in range(self.n_states) if s != self.terminal]


def _candidate_mdp(transitions: np.ndarray, rewards: np.ndarray, discount: float, terminal: int) -> TabularMdp:
    transitions = np.asarray(transitions)
    return TabularMdp(
        n_states=transitions.shape[0],
        n_actions=transitions.shape[1],
        transitions=transitions,
        rewards=rewards,
        discount=discount,
        terminal=terminal,
    )


def build_context(post: DirichletPosterior,
                  expert: Policy,
                  rewards: np.ndarray,
                  discount: float,
                  epsilon: float,
                  anchor_mode=AnchorMode.MLE,
                  rng: Optional[np.random.Generator] = None,
                  terminal: Optional[int] = None) -> ConstraintContext:
    """
    Fix the anchor T_pi and V_pi for one dataset

    Args:
        post: Transition posterior
        expert: Expert policy
        rewards: Reward table R(s, a)
        discount: Discount factor
        epsilon: Ball radius of the expert
        anchor_mode: 'mle' mixes posterior-mean rows, 'sample' mixes one posterior draw
        rng: Random stream (required for anchor_mode 'sample')
        terminal: Terminal index (default: the posterior's)

    Returns:
        ConstraintContext
    """
    anchor_mode = parse_mode(AnchorMode, anchor_mode)
    terminal = post.terminal if terminal is None else terminal
    if terminal is None:
        raise ContractViolation("the terminal index is required to build a constraint context")
    rewards = np.asarray(rewards, dtype=np.float64)
    if expert.probs.shape != (post.n_states, post.n_actions) or rewards.shape != expert.probs.shape:
        raise ContractViolation(
            f"expert {expert.probs.shape} and rewards {rewards.shape} must match posterior "
            f"({post.n_states}, {post.n_actions})"
        )
    if epsilon < 0:
        raise ContractViolation("epsilon must be non-negative")

    if anchor_mode is AnchorMode.SAMPLE:
        if rng is None:
            raise ContractViolation("anchor_mode 'sample' needs a random stream")
        anchor_rows = sample_full(post, rng)
    else:
        anchor_rows = posterior_mean(post)
    anchor_rows[terminal] = 0.0
    anchor_rows[terminal, :, terminal] = 1.0

    anchor_mdp = _candidate_mdp(anchor_rows, rewards, discount, terminal)
    anchor_T_pi = anchor_mdp.policy_transitions(expert)
    v_expert = evaluate_policy_closed_form(anchor_mdp, expert)

    anchor_rows.flags.writeable = False
    anchor_T_pi.flags.writeable = False
    return ConstraintContext(
        anchor_rows=anchor_rows,
        anchor_T_pi=anchor_T_pi,
        v_expert=v_expert,
        expert=expert,
        epsilon=float(epsilon),
        rewards=anchor_mdp.rewards,
        discount=float(discount),
        terminal=int(terminal),
        anchor_mode=anchor_mode,
    )


def constraint_values(ctx: ConstraintContext, rows: np.ndarray, state: int, action: int) -> np.ndarray:
    """Vectorized constraint_value over a block of candidate rows (n, S)"""
    v = ctx.v_expert.v
    return v[state] - (ctx.rewards[state, action] + ctx.discount * (np.asarray(rows) @ v))


def constraint_value(ctx: ConstraintContext, row: np.ndarray, state: int, action: int) -> float:
    """
    V_pi(s) - (R(s, a) + gamma * row . V_pi)

    Positive means action a looks worse than the expert's value at s.
    """
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (ctx.n_states,):
        raise ContractViolation(f"row must have {ctx.n_states} entries, got shape {row.shape}")
    return float(constraint_values(ctx, row[np.newaxis, :], state, action)[0])


def _candidate_balls(mdp: TabularMdp, epsilon: float, expert: Policy, ball_source: BallSource,
                     options: Optional[PlanningOptions]):
    if ball_source is BallSource.Q_EXPERT:
        q = q_from_v(mdp, evaluate_policy_closed_form(mdp, expert))
    else:
        _, q, _ = (options or PlanningOptions()).plan(mdp)
    return epsilon_ball(q, epsilon, states=mdp.decision_states)


def ball_mismatches(candidate_T: np.ndarray,
                    rewards: np.ndarray,
                    discount: float,
                    epsilon: float,
                    expert: Policy,
                    ball_source=BallSource.Q_STAR,
                    terminal: Optional[int] = None,
                    options: Optional[PlanningOptions] = None) -> Tuple[Set[int], Set[int]]:
    """
    Where the candidate's epsilon-balls differ from the expert support

    Returns:
        (intruded, dropped): states where a never-taken action entered the
        ball, and states where a supported action fell out of it
    """
    ball_source = parse_mode(BallSource, ball_source)
    terminal = np.asarray(candidate_T).shape[0] - 1 if terminal is None else terminal
    mdp = _candidate_mdp(candidate_T, rewards, discount, terminal)
    balls = _candidate_balls(mdp, epsilon, expert, ball_source, options)

    intruded, dropped = set(), set()
    for state in mdp.decision_states:
        ball, support = balls.ball(int(state)), expert.support(int(state))
        if ball - support:
            intruded.add(int(state))
        if support - ball:
            dropped.add(int(state))
    return intruded, dropped


def ball_property_holds(candidate_T: np.ndarray,
                        rewards: np.ndarray,
                        discount: float,
                        epsilon: float,
                        expert: Policy,
                        ball_source=BallSource.Q_STAR,
                        terminal: Optional[int] = None,
                        options: Optional[PlanningOptions] = None) -> bool:
    """True iff every decision state's ball under candidate_T equals the expert support"""
    intruded, dropped = ball_mismatches(candidate_T, rewards, discount, epsilon, expert,
                                        ball_source, terminal, options)
    return not intruded and not dropped


def margin_violations(candidate_T: np.ndarray,
                     rewards: np.ndarray,
                     discount: float,
                     epsilon: float,
                     expert: Policy,
                     terminal: Optional[int] = None,
                     tol: float = MARGIN_TOL) -> List[Tuple[int, int]]:
    """
    Never-taken (s, a) that are not epsilon worse than the expert under candidate_T

    A pair violates when Q_pi(s, a) + epsilon < V_pi(s) fails by more than tol,
    with Q_pi and V_pi evaluated in closed form under the candidate dynamics.
    """
    terminal = np.asarray(candidate_T).shape[0] - 1 if terminal is None else terminal
    mdp = _candidate_mdp(candidate_T, rewards, discount, terminal)
    v = evaluate_policy_closed_form(mdp, expert)
    q = q_from_v(mdp, v).q
    never_taken = ~expert.support_mask

    violations = []
    for state in mdp.decision_states:
        for action in np.flatnonzero(never_taken[state]):
            if not q[state, action] + epsilon < v.v[state] + tol:
                violations.append((int(state), int(action)))
    return violations
