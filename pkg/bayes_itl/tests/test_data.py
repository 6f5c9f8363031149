"""Tests for expert rollouts, transition counts and batch files."""

import numpy as np
import pytest

from bayes_itl.core import Policy, TabularMdp, expert_policy_for
from bayes_itl.data import (
    DatasetManager,
    Step,
    Trajectory,
    TrajectoryBatch,
    batch_from_document,
    counts_from_trajectories,
    derive_dataset_seed,
    load_batch,
    merge_batches,
    rollout_batch,
    rollout_datasets,
)
from bayes_itl.errors import ContractViolation


@pytest.fixture
def looping_mdp():
    """One decision state that never reaches the terminal"""
    transitions = np.zeros((2, 2, 2))
    transitions[0, :, 0] = 1.0
    transitions[1, :, 1] = 1.0
    rewards = np.array([[1.0, 0.5], [0.0, 0.0]])
    return TabularMdp(2, 2, transitions, rewards, 0.9, terminal=1)


def test_deterministic_chain_rollout(branch_mdp):
    expert = Policy.one_hot([0, 0, 0], 2)
    batch = rollout_batch(branch_mdp, expert, episodes=40, seed=1)

    assert len(batch.trajectories) == 40
    for trajectory in batch.trajectories:
        assert trajectory.steps[-1].next_state == branch_mdp.terminal
        if trajectory.steps[0].state == 0:
            assert [tuple(step) for step in trajectory.steps] == [(0, 0, 1.0, 1), (1, 0, 3.0, 2)]
        else:
            assert [tuple(step) for step in trajectory.steps] == [(1, 0, 3.0, 2)]

    assert batch.counts[0, 1].sum() == 0
    assert batch.counts[1, 0, 2] == len(batch.trajectories)
    assert batch.visit_mask[1, 0]
    assert not batch.visit_mask[0, 1]


def test_rollout_stops_at_horizon(looping_mdp):
    batch = rollout_batch(looping_mdp, Policy.uniform(2, 2), episodes=6, horizon=5, seed=0)

    assert all(len(trajectory) == 5 for trajectory in batch.trajectories)
    assert batch.n_steps == 30


def test_rollout_is_reproducible(small_env):
    expert = expert_policy_for(small_env, 0.5)
    first = rollout_batch(small_env, expert, episodes=15, seed=42)
    second = rollout_batch(small_env, expert, episodes=15, seed=42)

    np.testing.assert_array_equal(first.counts, second.counts)
    assert first.metadata == second.metadata
    assert first.metadata["env_hash"] == small_env.fingerprint
    assert first.metadata["terminal"] == small_env.terminal


def test_rollout_follows_expert_support(small_env):
    expert = expert_policy_for(small_env, 0.0)
    batch = rollout_batch(small_env, expert, episodes=50, seed=3)

    taken = batch.counts.sum(axis=2) > 0
    assert not np.any(taken & ~expert.support_mask)


def test_rollout_argument_checks(small_env):
    expert = expert_policy_for(small_env, 0.0)
    with pytest.raises(ContractViolation):
        rollout_batch(small_env, expert, episodes=0)
    with pytest.raises(ContractViolation):
        rollout_batch(small_env, expert, episodes=3, horizon=0)
    with pytest.raises(ContractViolation):
        rollout_batch(small_env, Policy.uniform(3, 3), episodes=3)


def test_counts_of_empty_and_single_step():
    assert not counts_from_trajectories([], 4, 3).any()

    counts = counts_from_trajectories([Trajectory((Step(1, 2, 0.0, 3),))], 4, 3)
    assert counts[1, 2, 3] == 1
    assert counts.sum() == 1


def test_counts_reject_out_of_range_steps():
    with pytest.raises(ContractViolation):
        counts_from_trajectories([Trajectory((Step(0, 3, 0.0, 1),))], 4, 3)


def test_trajectory_steps_must_chain():
    with pytest.raises(ContractViolation):
        Trajectory((Step(0, 0, 0.0, 1), Step(2, 0, 0.0, 3)))


def test_counts_add_across_batches(small_env):
    expert = expert_policy_for(small_env, 1.0)
    first = rollout_batch(small_env, expert, episodes=10, seed=1)
    second = rollout_batch(small_env, expert, episodes=7, seed=2)
    merged = merge_batches(first, second)

    np.testing.assert_array_equal(merged.counts, first.counts + second.counts)
    assert len(merged.trajectories) == 17


def test_counts_ignore_trajectory_order(small_env):
    expert = expert_policy_for(small_env, 1.0)
    batch = rollout_batch(small_env, expert, episodes=10, seed=4)
    reversed_batch = TrajectoryBatch.from_trajectories(batch.trajectories[::-1], batch.n_states, batch.n_actions)
    np.testing.assert_array_equal(batch.counts, reversed_batch.counts)


def test_dataset_seed_derivation():
    golden = 0x9E3779B97F4A7C15
    mask = (1 << 64) - 1

    assert derive_dataset_seed(0, 0) == golden
    assert derive_dataset_seed(5, 1) == 5 ^ ((2 * golden) & mask)
    assert derive_dataset_seed(123, 9) == 123 ^ ((10 * golden) & mask)
    assert len({derive_dataset_seed(7, i) for i in range(1000)}) == 1000


def test_rollout_datasets_match_single_rollouts(small_env):
    expert = expert_policy_for(small_env, 1.0)
    batches = rollout_datasets(small_env, expert, episodes=5, horizon=20, n_datasets=3, master_seed=9)

    for index, batch in enumerate(batches):
        single = rollout_batch(small_env, expert, 5, 20, derive_dataset_seed(9, index))
        np.testing.assert_array_equal(batch.counts, single.counts)
        assert batch.metadata["dataset_index"] == index


@pytest.mark.parametrize("compress", [False, True])
def test_dataset_manager_files(tmp_path, small_env, compress):
    expert = expert_policy_for(small_env, 1.0)
    batches = rollout_datasets(small_env, expert, episodes=5, horizon=20, n_datasets=2, master_seed=1)

    manager = DatasetManager(tmp_path / "data", compress=compress)
    paths = manager.save_batches(batches)

    assert [p.name for p in paths] == ([f"batch_000{i}.json.gz" for i in range(2)] if compress
                                       else [f"batch_000{i}.json" for i in range(2)])
    assert manager.list_batches() == paths

    loaded = manager.load_batches()
    for original, restored in zip(batches, loaded):
        np.testing.assert_array_equal(original.counts, restored.counts)
        assert restored.metadata["env_hash"] == small_env.fingerprint
    np.testing.assert_array_equal(load_batch(paths[1]).counts, batches[1].counts)


def test_batch_document_needs_shape():
    with pytest.raises(ContractViolation):
        batch_from_document({"metadata": {}, "trajectories": []})


def test_dataset_manager_orders_by_index(tmp_path, small_env):
    expert = expert_policy_for(small_env, 0.0)
    batch = rollout_batch(small_env, expert, episodes=2, seed=0)
    manager = DatasetManager(tmp_path / "data")
    for index in (10000, 2, 9999):
        manager.save_batch(batch, index)

    names = [path.name for path in manager.list_batches()]
    assert names == ["batch_0002.json", "batch_9999.json", "batch_10000.json"]
    assert [b.metadata["dataset_index"] for b in manager.load_batches()] == [2, 9999, 10000]


def test_dataset_manager_rejects_duplicate_index(tmp_path, small_env):
    expert = expert_policy_for(small_env, 0.0)
    batch = rollout_batch(small_env, expert, episodes=2, seed=0)
    DatasetManager(tmp_path / "data").save_batch(batch, 3)
    DatasetManager(tmp_path / "data", compress=True).save_batch(batch, 3)

    with pytest.raises(ContractViolation, match="batch 3 is stored twice"):
        DatasetManager(tmp_path / "data").list_batches()


def test_empirical_frequencies_converge_on_expert_support(small_env):
    expert = expert_policy_for(small_env, 0.0)
    batch = rollout_batch(small_env, expert, episodes=10_000, seed=8)

    visits = batch.counts.sum(axis=2)
    well_visited = [(s, a) for s in small_env.decision_states for a in range(small_env.n_actions)
                    if visits[s, a] >= 5000]
    assert well_visited
    for s, a in well_visited:
        assert expert.probs[s, a] > 0
        frequencies = batch.counts[s, a] / visits[s, a]
        assert np.abs(frequencies - small_env.transitions[s, a]).sum() < 0.05
