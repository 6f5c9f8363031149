#!/usr/bin/env python3
"""
Planning

Exact planning and evaluation for tabular MDPs: closed-form policy evaluation,
Q from V, value iteration, epsilon-balls and expert policy construction.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from ..errors import ContractViolation, PlanningConvergenceError
from .mdp import EpsilonBallMap, Policy, QTable, TabularMdp, ValueTable

logger = logging.getLogger("BayesITL.Planning")

# Membership slack absorbing float noise in epsilon-ball tests
BALL_SLACK = 1e-9


class StateKind(str, Enum):
    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class PlanningOptions:
    """Value iteration settings shared by every caller that plans"""

    tol: float = 1e-10
    max_iters: int = 100_000
    exact_eval_every: int = 10

    @classmethod
    def from_config(cls, config) -> "PlanningOptions":
        return cls(
            tol=float(config.get("planning.tol", 1e-10)),
            max_iters=int(config.get("planning.max_iters", 100_000)),
            exact_eval_every=int(config.get("planning.exact_eval_every", 10)),
        )

    def plan(self, mdp: TabularMdp) -> Tuple[ValueTable, QTable, Policy]:
        return value_iteration(mdp, self.tol, self.max_iters, exact_eval_every=self.exact_eval_every)


def _solve_policy_values(transitions: np.ndarray, rewards: np.ndarray, discount: float,
                         probs: np.ndarray) -> np.ndarray:
    t_pi = np.einsum("sa,sat->st", probs, transitions)
    r_pi = np.einsum("sa,sa->s", probs, rewards)
    system = np.eye(t_pi.shape[0]) - discount * t_pi
    return np.linalg.solve(system, r_pi)


def evaluate_policy_closed_form(mdp: TabularMdp, policy: Policy) -> ValueTable:
    """
    Solve (I - gamma T_pi) V = R_pi with a linear solve

    Args:
        mdp: MDP instance
        policy: Policy to evaluate

    Returns:
        Exact value table of the policy
    """
    mdp.check_policy(policy)
    return ValueTable(_solve_policy_values(mdp.transitions, mdp.rewards, mdp.discount, policy.probs))


def evaluate_policy_iterative(mdp: TabularMdp, policy: Policy, tol: float = 1e-12,
                              max_iters: int = 1_000_000) -> ValueTable:
    """Fixed-point policy evaluation, used as an oracle for the closed form"""
    t_pi = mdp.policy_transitions(policy)
    r_pi = mdp.policy_rewards(policy)
    v = np.zeros(mdp.n_states)
    for iteration in range(1, max_iters + 1):
        v_next = r_pi + mdp.discount * t_pi @ v
        change = np.max(np.abs(v_next - v))
        v = v_next
        if change <= tol:
            return ValueTable(v)
    raise PlanningConvergenceError(float(change), max_iters)


def q_from_v(mdp: TabularMdp, v: ValueTable) -> QTable:
    """Q(s, a) = R(s, a) + gamma * sum_s' T(s, a, s') V(s')"""
    if v.v.shape != (mdp.n_states,):
        raise ContractViolation(f"value table shape {v.v.shape} does not match {mdp.n_states} states")
    return QTable(mdp.rewards + mdp.discount * np.einsum("sat,t->sa", mdp.transitions, v.v))


def q_expert(mdp: TabularMdp, policy: Policy) -> QTable:
    """Q of a fixed policy via closed-form evaluation"""
    return q_from_v(mdp, evaluate_policy_closed_form(mdp, policy))


def value_iteration(mdp: TabularMdp,
                    tol: float = 1e-10,
                    max_iters: int = 100_000,
                    exact_eval_every: int = 10) -> Tuple[ValueTable, QTable, Policy]:
    """
    Optimal values, action values and a greedy deterministic policy

    Every `exact_eval_every` sweeps the current greedy policy is evaluated in
    closed form; its values are accepted as soon as their own Bellman residual
    is within tol. Set exact_eval_every to 0 for plain sweeps.

    Args:
        mdp: MDP instance
        tol: Sup-norm Bellman residual bound for the returned values
        max_iters: Sweep budget
        exact_eval_every: Period of closed-form evaluation of the greedy policy

    Returns:
        (V*, Q*, greedy policy) with ties broken by lowest action index

    Raises:
        PlanningConvergenceError: residual still above tol after max_iters sweeps
    """
    if tol <= 0:
        raise ContractViolation("tol must be positive")

    transitions, rewards, discount = mdp.transitions, mdp.rewards, mdp.discount
    v = np.zeros(mdp.n_states)
    residual = np.inf

    for iteration in range(1, max_iters + 1):
        q = rewards + discount * np.einsum("sat,t->sa", transitions, v)
        v_next = q.max(axis=1)
        residual = float(np.max(np.abs(v_next - v)))
        v = v_next
        if residual <= tol:
            break

        if exact_eval_every and iteration % exact_eval_every == 0:
            greedy = np.zeros_like(q)
            greedy[np.arange(mdp.n_states), np.argmax(q, axis=1)] = 1.0
            v_pi = _solve_policy_values(transitions, rewards, discount, greedy)
            backup = (rewards + discount * np.einsum("sat,t->sa", transitions, v_pi)).max(axis=1)
            if np.max(np.abs(backup - v_pi)) <= tol:
                v = v_pi
                residual = 0.0
                break
    else:
        raise PlanningConvergenceError(residual, max_iters)

    q_table = q_from_v(mdp, ValueTable(v))
    policy = Policy.one_hot(q_table.greedy_actions(), mdp.n_actions)
    logger.debug(f"Value iteration converged after {iteration} sweeps")
    return ValueTable(v), q_table, policy


def finite_horizon_values(mdp: TabularMdp, horizon: int) -> ValueTable:
    """Optimal horizon-H values by backward dynamic programming"""
    v = np.zeros(mdp.n_states)
    for _ in range(horizon):
        v = (mdp.rewards + mdp.discount * np.einsum("sat,t->sa", mdp.transitions, v)).max(axis=1)
    return ValueTable(v)


def epsilon_ball(q: QTable, epsilon: float, states: Optional[Iterable[int]] = None) -> EpsilonBallMap:
    """
    Actions whose value is within epsilon of the best action at each state

    Args:
        q: Action values
        epsilon: Ball radius (>= 0)
        states: States to include (default: all rows of q)

    Returns:
        EpsilonBallMap over the requested states
    """
    if epsilon < 0:
        raise ContractViolation("epsilon must be non-negative")

    rows = q.q
    states = range(rows.shape[0]) if states is None else states
    gaps = rows.max(axis=1, keepdims=True) - rows
    balls = {
        int(s): frozenset(int(a) for a in np.flatnonzero(gaps[s] <= epsilon + BALL_SLACK))
        for s in states
    }
    return EpsilonBallMap(balls=balls, epsilon=float(epsilon), n_actions=rows.shape[1])


def build_expert_policy(balls: EpsilonBallMap) -> Policy:
    """Uniform distribution over each state's ball"""
    n_states = max(balls.balls) + 1 if balls.balls else 0
    if sorted(balls.balls) != list(range(n_states)):
        raise ContractViolation("expert policy needs a ball for every state")

    probs = np.zeros((n_states, balls.n_actions))
    for state, ball in balls.balls.items():
        probs[state, sorted(ball)] = 1.0 / len(ball)
    return Policy(probs)


def classify_states(policy: Policy, terminal: Optional[int] = None) -> Dict[int, StateKind]:
    """Deterministic vs stochastic-policy states, terminal excluded"""
    kinds = {}
    for state in range(policy.n_states):
        if state == terminal:
            continue
        n_support = int(np.count_nonzero(policy.probs[state] > 1e-12))
        kinds[state] = StateKind.DETERMINISTIC if n_support == 1 else StateKind.STOCHASTIC
    return kinds


def expert_policy_for(mdp: TabularMdp, epsilon: float,
                      options: Optional[PlanningOptions] = None) -> Policy:
    """Epsilon-optimal expert of an MDP: uniform over the balls of its Q*"""
    options = options or PlanningOptions()
    _, q_star, _ = options.plan(mdp)
    return build_expert_policy(epsilon_ball(q_star, epsilon))
