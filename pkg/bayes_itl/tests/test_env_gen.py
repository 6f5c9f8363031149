"""Tests for random environments and the structure search."""

import numpy as np
import pytest
from pydantic import ValidationError

from bayes_itl.cache import CacheManager
from bayes_itl.envs import (
    EnvSpec,
    describe_env,
    find_env_with_structure,
    generate_env,
    generator,
    parse_targets,
    reference_env,
    reference_targets,
)
from bayes_itl.errors import ConfigError, ContractViolation, StructureSearchError


def test_generation_is_deterministic_per_seed():
    spec = EnvSpec(n_decision_states=5, n_actions=3, seed=3)
    first, second = generate_env(spec), generate_env(spec)
    other = generate_env(spec.model_copy(update={"seed": 4}))

    np.testing.assert_array_equal(first.transitions, second.transitions)
    np.testing.assert_array_equal(first.rewards, second.rewards)
    assert first.fingerprint == second.fingerprint
    assert first.fingerprint != other.fingerprint


def test_generated_env_shape_and_terminal():
    mdp = generate_env(EnvSpec(seed=1))

    assert mdp.n_states == 16
    assert mdp.n_actions == 6
    assert mdp.terminal == 15
    assert mdp.discount == 0.95
    np.testing.assert_allclose(mdp.transitions.sum(axis=2), 1.0, atol=1e-12)
    assert np.all(mdp.transitions[15, :, 15] == 1.0)
    assert np.all(mdp.rewards[15] == 0.0)
    assert mdp.rewards[:15].min() >= 0.0
    assert mdp.rewards[:15].max() <= 15.0


def test_reward_range_defaults_to_state_count():
    assert EnvSpec(n_decision_states=5).reward_high == 5.0
    assert EnvSpec(n_decision_states=5, reward_high=2.0).reward_high == 2.0
    with pytest.raises(ValidationError):
        EnvSpec(reward_low=3.0, reward_high=1.0)


def test_flat_rows_are_near_uniform():
    spec = EnvSpec(n_decision_states=4, n_actions=3, skew_mix=0.0, flat_concentration=1e6, seed=0)
    mdp = generate_env(spec)
    decision_rows = mdp.transitions[mdp.decision_states]
    assert np.max(np.abs(decision_rows - 1.0 / mdp.n_states)) < 0.01


def test_action_reward_mode_shares_rewards_across_states():
    mdp = generate_env(EnvSpec(n_decision_states=4, n_actions=3, reward_mode="action", seed=0))
    rows = mdp.rewards[mdp.decision_states]
    assert np.all(rows == rows[0])


def test_describe_env_counts(branch_mdp):
    description = describe_env(branch_mdp, [0.0, 2.0, 5.0])

    assert description.epsilon_to_stochastic_count == {0.0: 0, 2.0: 1, 5.0: 2}
    assert description.q_star_range == pytest.approx((0.0, 3.7))
    assert description.to_document()["epsilon_to_stochastic_count"] == {"0.0": 0, "2.0": 1, "5.0": 2}


def test_describe_env_counts_are_monotone(small_env):
    counts = describe_env(small_env, [0.0, 0.5, 1.0, 2.0, 1e9]).epsilon_to_stochastic_count
    values = [counts[e] for e in sorted(counts)]
    assert values == sorted(values)
    assert counts[1e9] == 4


def test_describe_env_rejects_bad_epsilons(branch_mdp):
    with pytest.raises(ContractViolation):
        describe_env(branch_mdp, [])
    with pytest.raises(ContractViolation):
        describe_env(branch_mdp, [0.0, -1.0])


def test_structure_search_trivial_target():
    spec = EnvSpec(n_decision_states=4, n_actions=3, seed=20)
    mdp = find_env_with_structure(spec, {0.0: 0}, max_tries=5)
    assert describe_env(mdp, [0.0]).epsilon_to_stochastic_count == {0.0: 0}


def test_structure_search_reports_closest_candidate():
    spec = EnvSpec(n_decision_states=4, n_actions=3, seed=7)
    with pytest.raises(StructureSearchError) as info:
        find_env_with_structure(spec, {0.0: 9999}, max_tries=10)

    error = info.value
    assert error.tries == 10
    assert error.closest_seed == 7
    assert error.closest_counts == {0.0: 0}


def test_structure_search_is_cached(tmp_path):
    cache = CacheManager(tmp_path / "search")
    spec = EnvSpec(n_decision_states=4, n_actions=3, seed=30)

    first = find_env_with_structure(spec, {0.0: 0}, max_tries=5, cache=cache)
    assert cache.get_cache_stats()["total_entries"] == 1
    second = find_env_with_structure(spec, {0.0: 0}, max_tries=5, cache=cache)

    assert first.fingerprint == second.fingerprint
    assert cache.get_cache_stats()["total_entries"] == 1


def test_structure_search_argument_checks():
    spec = EnvSpec(n_decision_states=4, n_actions=3)
    with pytest.raises(ContractViolation):
        find_env_with_structure(spec, {0.0: 0}, max_tries=0)
    with pytest.raises(ContractViolation):
        find_env_with_structure(spec, {}, max_tries=3)


def test_parse_targets():
    assert parse_targets("0:0, 3:3,4:6") == {0.0: 0, 3.0: 3, 4.0: 6}
    assert parse_targets("") == {}
    with pytest.raises(ContractViolation, match="eps:count"):
        parse_targets("0:0,3")


def test_reference_targets_from_config(isolated_config):
    assert reference_targets(isolated_config) == {0.0: 0, 3.0: 3, 4.0: 6}


def test_reference_env_is_the_pinned_instance(isolated_config):
    mdp = reference_env(isolated_config)

    assert mdp.fingerprint == "a529453d4557d07bc609921c4d12cbba"
    assert (mdp.n_states, mdp.n_actions) == (16, 6)
    counts = describe_env(mdp, [0.0, 3.0, 4.0]).epsilon_to_stochastic_count
    assert counts == {0.0: 0, 3.0: 3, 4.0: 6}


def test_reference_env_rejects_a_moved_instance(isolated_config):
    isolated_config.set("env.reference_fingerprint", "0" * 32)
    with pytest.raises(ConfigError, match="expected 0000"):
        reference_env(isolated_config)


def test_malformed_cached_search_is_replaced(tmp_path):
    cache = CacheManager(tmp_path / "search")
    spec = EnvSpec(n_decision_states=4, n_actions=3, seed=30)
    params = generator._search_params(spec, {0.0: 0}, 5)
    cache.set("find_env_with_structure", {"unexpected": True}, params)

    mdp = find_env_with_structure(spec, {0.0: 0}, max_tries=5, cache=cache)

    cached = cache.get("find_env_with_structure", params)
    assert cached is not None and isinstance(cached["seed"], int)
    assert generate_env(spec.model_copy(update={"seed": cached["seed"]})).fingerprint == mdp.fingerprint
    assert cache.get_cache_stats()["total_entries"] == 1


def test_cache_invalidate_removes_one_entry(tmp_path):
    cache = CacheManager(tmp_path / "c")
    cache.set("op", {"seed": 1}, {"a": 1})
    cache.set("op", {"seed": 2}, {"a": 2})

    assert cache.invalidate("op", {"a": 1})
    assert cache.get("op", {"a": 1}) is None
    assert cache.get("op", {"a": 2}) == {"seed": 2}
