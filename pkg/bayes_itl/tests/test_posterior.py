"""Tests for the Dirichlet transition posterior."""

import numpy as np
import pytest

from bayes_itl.core import expert_policy_for
from bayes_itl.data import rollout_batch
from bayes_itl.errors import ContractViolation
from bayes_itl.posterior import (
    DirichletPosterior,
    fit_posterior,
    posterior_mean,
    sample_full,
    sample_row,
    sample_rows,
)


@pytest.fixture
def counts():
    counts = np.zeros((3, 2, 3), dtype=np.int64)
    counts[0, 0] = [2, 0, 1]
    counts[1, 1] = [2000, 0, 1000]
    return counts


def test_alpha_is_counts_plus_prior(counts):
    post = fit_posterior(counts)
    np.testing.assert_array_equal(post.alpha[0, 0], [3.0, 1.0, 2.0])
    np.testing.assert_array_equal(post.alpha[0, 1], [1.0, 1.0, 1.0])

    post = fit_posterior(counts, prior_concentration=0.5)
    np.testing.assert_array_equal(post.alpha[0, 0], [2.5, 0.5, 1.5])


def test_mean_is_smoothed_frequencies(counts):
    mean = posterior_mean(fit_posterior(counts))

    np.testing.assert_allclose(mean[0, 0], [0.5, 1 / 6, 1 / 3])
    np.testing.assert_allclose(mean[0, 1], [1 / 3, 1 / 3, 1 / 3])
    np.testing.assert_allclose(mean.sum(axis=2), 1.0)


def test_terminal_rows_stay_absorbing(counts):
    post = fit_posterior(counts, terminal=2)
    mean = posterior_mean(post)
    np.testing.assert_array_equal(mean[2], [[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])

    draws = sample_full(post, np.random.default_rng(0))
    np.testing.assert_array_equal(draws[2], mean[2])
    np.testing.assert_array_equal(sample_rows(post, 2, 1, np.random.default_rng(0), 4)[:, 2], 1.0)


def test_monte_carlo_mean_matches_analytic_mean():
    rng = np.random.default_rng(17)
    for _ in range(20):
        alpha = rng.integers(0, 8, size=(1, 1, 5)).astype(float)
        post = fit_posterior(alpha)
        rows = sample_rows(post, 0, 0, rng, 10_000)

        assert np.abs(rows.mean(axis=0) - posterior_mean(post)[0, 0]).sum() < 0.02


def test_draws_concentrate_with_data(counts):
    post = fit_posterior(counts)
    rows = sample_rows(post, 1, 1, np.random.default_rng(3), 500)

    assert rows.std(axis=0).max() < 0.02
    np.testing.assert_allclose(rows.mean(axis=0), posterior_mean(post)[1, 1], atol=0.01)


def test_draws_are_probability_vectors(counts):
    rows = sample_rows(fit_posterior(counts), 0, 0, np.random.default_rng(1), 100)
    assert rows.shape == (100, 3)
    assert np.all(rows >= 0.0)
    np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-12)


def test_tiny_concentrations_still_give_probability_vectors():
    post = fit_posterior(np.zeros((2, 1, 2)), prior_concentration=1e-12)
    rows = sample_rows(post, 0, 0, np.random.default_rng(0), 200)

    assert np.all(np.isfinite(rows))
    np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-12)


def test_draw_sequence_is_reproducible(counts):
    post = fit_posterior(counts, terminal=2)
    first = [sample_row(post, 0, 0, np.random.default_rng(8)) for _ in range(3)]
    second = [sample_row(post, 0, 0, np.random.default_rng(8)) for _ in range(3)]
    np.testing.assert_array_equal(first, second)

    np.testing.assert_array_equal(sample_full(post, np.random.default_rng(5)),
                                  sample_full(post, np.random.default_rng(5)))


def test_fit_from_batch_takes_terminal_from_metadata(small_env):
    batch = rollout_batch(small_env, expert_policy_for(small_env, 1.0), episodes=20, seed=0)
    post = fit_posterior(batch)

    assert post.terminal == small_env.terminal
    np.testing.assert_array_equal(post.alpha, batch.counts + 1.0)


def test_posterior_contract_violations(counts):
    with pytest.raises(ContractViolation):
        fit_posterior(counts, prior_concentration=0.0)
    with pytest.raises(ContractViolation):
        fit_posterior(-counts - 1)
    with pytest.raises(ContractViolation):
        DirichletPosterior(np.ones((3, 2, 4)))
    with pytest.raises(ContractViolation):
        sample_row(fit_posterior(counts), 3, 0, np.random.default_rng(0))
