#!/usr/bin/env python3
"""
Policy Metrics

Averaged policies over sampled dynamics, and the scores of an inferred
policy against the true environment: the summed optimality gap, accuracy at
deterministic and stochastic expert states, ball membership of mistakes,
action-ranking agreement and policy entropy.
"""

import logging
import math
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import entropy, kendalltau

from ..core import PlanningOptions, Policy, QTable, StateKind, TabularMdp, classify_states, epsilon_ball
from ..errors import ContractViolation, PlanningConvergenceError

logger = logging.getLogger("BayesITL.Metrics")

# True Q* per MDP fingerprint; one planning run per environment and process
_Q_STAR_CACHE: Dict[str, QTable] = {}


class AccuracyMetrics(NamedTuple):
    """Percentages; NaN when the denominator is empty"""

    deterministic: float
    stochastic: float
    mistake_ball_rate: float


def true_q_star(mdp: TabularMdp, options: Optional[PlanningOptions] = None) -> QTable:
    key = mdp.fingerprint
    if key not in _Q_STAR_CACHE:
        _, q_star, _ = (options or PlanningOptions()).plan(mdp)
        _Q_STAR_CACHE[key] = q_star
    return _Q_STAR_CACHE[key]


def mean_policy(samples: Sequence[np.ndarray], rewards: np.ndarray, discount: float,
                terminal: Optional[int] = None,
                options: Optional[PlanningOptions] = None) -> Tuple[Policy, QTable]:
    """
    Average greedy policy and optimal Q over sampled dynamics

    Returns:
        (pi_hat, q_hat): elementwise means of the per-sample one-hot greedy
        policies and optimal Q tables
    """
    if not len(samples):
        raise ContractViolation("mean_policy needs at least one sample")

    options = options or PlanningOptions()
    rewards = np.asarray(rewards, dtype=np.float64)
    n_states, n_actions = rewards.shape
    terminal = n_states - 1 if terminal is None else terminal

    policy_sum = np.zeros((n_states, n_actions))
    q_sum = np.zeros((n_states, n_actions))
    for index, transitions in enumerate(samples):
        mdp = TabularMdp(n_states, n_actions, transitions, rewards, discount, terminal)
        try:
            _, q, greedy = options.plan(mdp)
        except PlanningConvergenceError:
            logger.error(f"Planning failed on sample {index}")
            raise
        policy_sum += greedy.probs
        q_sum += q.q

    pi_hat = policy_sum / len(samples)
    return Policy(pi_hat / pi_hat.sum(axis=1, keepdims=True)), QTable(q_sum / len(samples))


def chosen_actions(pi_hat: Policy) -> np.ndarray:
    """argmax of each row, ties to the lowest action index"""
    return np.argmax(pi_hat.probs, axis=1)


def q_star_metric(true_mdp: TabularMdp, pi_hat: Policy, options: Optional[PlanningOptions] = None) -> float:
    """
    Sum over decision states of Q*(s, a*) - sum_a pi_hat(a|s) Q*(s, a)

    Zero for an optimal policy; lower is better.
    """
    true_mdp.check_policy(pi_hat)
    q = true_q_star(true_mdp, options).q
    states = true_mdp.decision_states
    gaps = q[states].max(axis=1) - np.einsum("sa,sa->s", pi_hat.probs[states], q[states])
    return float(gaps.sum())


def _percent(hits: int, total: int) -> float:
    return 100.0 * hits / total if total else math.nan


def accuracy_metrics(true_mdp: TabularMdp, expert: Policy, pi_hat: Policy, epsilon: float,
                     options: Optional[PlanningOptions] = None) -> AccuracyMetrics:
    """
    Deterministic accuracy, stochastic accuracy and ball membership of mistakes

    Deterministic states score the chosen action against the expert's sole
    action; stochastic states and mistakes score against argmax Q* of the
    true dynamics; a mistake counts as in-ball when the chosen action lies in
    the true epsilon-ball.
    """
    true_mdp.check_policy(expert)
    true_mdp.check_policy(pi_hat)
    q_star = true_q_star(true_mdp, options)
    best = q_star.greedy_actions()
    balls = epsilon_ball(q_star, epsilon, states=true_mdp.decision_states)
    chosen = chosen_actions(pi_hat)
    kinds = classify_states(expert, terminal=true_mdp.terminal)

    det_hits = det_total = stoch_hits = stoch_total = mistakes = mistakes_in_ball = 0
    for state, kind in kinds.items():
        action = int(chosen[state])
        if kind is StateKind.DETERMINISTIC:
            det_total += 1
            det_hits += int(action in expert.support(state))
        else:
            stoch_total += 1
            stoch_hits += int(action == best[state])
        if action != best[state]:
            mistakes += 1
            mistakes_in_ball += int(action in balls.ball(state))

    return AccuracyMetrics(
        deterministic=_percent(det_hits, det_total),
        stochastic=_percent(stoch_hits, stoch_total),
        mistake_ball_rate=_percent(mistakes_in_ball, mistakes),
    )


def ranking_agreement(true_mdp: TabularMdp, expert: Policy, q_hat: QTable,
                      options: Optional[PlanningOptions] = None) -> float:
    """
    Mean Kendall tau between q_hat and true Q* over the supported actions of
    each stochastic expert state; NaN when no state has a defined tau
    """
    q_star = true_q_star(true_mdp, options).q
    kinds = classify_states(expert, terminal=true_mdp.terminal)

    taus = []
    for state, kind in kinds.items():
        if kind is not StateKind.STOCHASTIC:
            continue
        actions = sorted(expert.support(state))
        tau, _ = kendalltau(q_hat.q[state, actions], q_star[state, actions])
        if not math.isnan(tau):
            taus.append(tau)
    return float(np.mean(taus)) if taus else math.nan


def stochastic_entropy(expert: Policy, pi_hat: Policy, terminal: Optional[int] = None) -> float:
    """Mean entropy (nats) of pi_hat rows at stochastic expert states; NaN if none"""
    kinds = classify_states(expert, terminal=terminal)
    states = [s for s, kind in kinds.items() if kind is StateKind.STOCHASTIC]
    if not states:
        return math.nan
    return float(np.mean([entropy(pi_hat.probs[s]) for s in states]))
