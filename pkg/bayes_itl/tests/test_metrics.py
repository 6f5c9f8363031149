"""Tests for averaged policies and policy scores."""

import math

import numpy as np
import pytest

from bayes_itl.core import Policy, TabularMdp, expert_policy_for
from bayes_itl.errors import ContractViolation
from bayes_itl.experiments import (
    accuracy_metrics,
    chosen_actions,
    mean_policy,
    q_star_metric,
    ranking_agreement,
    stochastic_entropy,
)


@pytest.fixture
def one_step_mdp():
    """Single decision state with Q* = [5, 3]"""
    transitions = np.zeros((2, 2, 2))
    transitions[:, :, 1] = 1.0
    rewards = np.array([[5.0, 3.0], [0.0, 0.0]])
    return TabularMdp(2, 2, transitions, rewards, 0.95, terminal=1)


def _shortcut(branch_mdp):
    """branch_mdp dynamics where action 1 at s0 also reaches s1"""
    transitions = branch_mdp.transitions.copy()
    transitions[0, 1] = [0.0, 1.0, 0.0]
    return transitions


def test_q_star_metric_worked_example(one_step_mdp):
    uniform = Policy(np.full((2, 2), 0.5))
    assert q_star_metric(one_step_mdp, uniform) == pytest.approx(1.0)
    assert q_star_metric(one_step_mdp, Policy.one_hot([1, 0], 2)) == pytest.approx(2.0)


def test_q_star_metric_is_zero_for_optimal_policy(small_env, branch_mdp):
    for mdp in (small_env, branch_mdp):
        assert q_star_metric(mdp, expert_policy_for(mdp, 0.0)) == pytest.approx(0.0, abs=1e-9)


def test_mean_policy_averages_greedy_policies(branch_mdp):
    samples = [branch_mdp.transitions, _shortcut(branch_mdp)]
    pi_hat, q_hat = mean_policy(samples, branch_mdp.rewards, branch_mdp.discount, branch_mdp.terminal)

    np.testing.assert_allclose(pi_hat.probs[0], [0.5, 0.5])
    np.testing.assert_allclose(pi_hat.probs[1], [1.0, 0.0])
    np.testing.assert_allclose(q_hat.q[0], [3.7, (2.0 + 4.7) / 2])
    np.testing.assert_array_equal(chosen_actions(pi_hat)[:2], [0, 0])

    with pytest.raises(ContractViolation):
        mean_policy([], branch_mdp.rewards, branch_mdp.discount)


def test_accuracy_of_the_expert(branch_mdp):
    expert = expert_policy_for(branch_mdp, 0.0)
    accuracy = accuracy_metrics(branch_mdp, expert, expert, 0.0)

    assert accuracy.deterministic == 100.0
    assert math.isnan(accuracy.stochastic)
    assert math.isnan(accuracy.mistake_ball_rate)


def test_accuracy_counts_mistakes_against_the_ball(branch_mdp):
    expert = expert_policy_for(branch_mdp, 0.0)
    wrong_at_s0 = Policy.one_hot([1, 0, 0], 2)

    accuracy = accuracy_metrics(branch_mdp, expert, wrong_at_s0, 0.0)
    assert accuracy.deterministic == 50.0
    assert accuracy.mistake_ball_rate == 0.0

    # Action 1 at s0 is 1.7 below the best, so it lies in the 2.0-ball
    assert accuracy_metrics(branch_mdp, expert, wrong_at_s0, 2.0).mistake_ball_rate == 100.0


def test_stochastic_accuracy_scores_against_best_action(branch_mdp):
    expert = expert_policy_for(branch_mdp, 2.0)

    best = accuracy_metrics(branch_mdp, expert, Policy.one_hot([0, 0, 0], 2), 2.0)
    assert best.stochastic == 100.0
    assert best.deterministic == 100.0

    other = accuracy_metrics(branch_mdp, expert, Policy.one_hot([1, 0, 0], 2), 2.0)
    assert other.stochastic == 0.0
    assert other.mistake_ball_rate == 100.0


def test_ranking_agreement(branch_mdp):
    expert = expert_policy_for(branch_mdp, 2.0)
    _, q_same = mean_policy([branch_mdp.transitions], branch_mdp.rewards, branch_mdp.discount)
    _, q_flipped = mean_policy([_shortcut(branch_mdp)], branch_mdp.rewards, branch_mdp.discount)

    assert ranking_agreement(branch_mdp, expert, q_same) == pytest.approx(1.0)
    assert ranking_agreement(branch_mdp, expert, q_flipped) == pytest.approx(-1.0)
    assert math.isnan(ranking_agreement(branch_mdp, expert_policy_for(branch_mdp, 0.0), q_same))


def test_stochastic_entropy(branch_mdp):
    expert = expert_policy_for(branch_mdp, 2.0)
    uniform = Policy(np.full((3, 2), 0.5))

    assert stochastic_entropy(expert, uniform, terminal=2) == pytest.approx(math.log(2.0))
    assert stochastic_entropy(expert, Policy.one_hot([0, 0, 0], 2), terminal=2) == pytest.approx(0.0)
    assert math.isnan(stochastic_entropy(expert_policy_for(branch_mdp, 0.0), uniform, terminal=2))
