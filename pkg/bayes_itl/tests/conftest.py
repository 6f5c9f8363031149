"""Shared fixtures: tiny hand-built MDPs and an isolated toolkit config."""

import numpy as np
import pytest

from bayes_itl.cache import cache_manager
from bayes_itl.config import Config, set_config
from bayes_itl.core import TabularMdp
from bayes_itl.envs import EnvSpec, generate_env


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Global config whose cache lives under the test's tmp_path"""
    config = Config()
    config.set("cache.directory", str(tmp_path / "cache"))
    set_config(config)
    monkeypatch.setattr(cache_manager, "_cache_manager", None)
    yield config
    set_config(None)


@pytest.fixture
def chain_mdp():
    """s0 -> s1 -> terminal with R(s0, .) = 1, R(s1, .) = 3, gamma 0.95"""
    transitions = np.zeros((3, 2, 3))
    transitions[0, :, 1] = 1.0
    transitions[1, :, 2] = 1.0
    transitions[2, :, 2] = 1.0
    rewards = np.array([[1.0, 1.0], [3.0, 3.0], [0.0, 0.0]])
    return TabularMdp(3, 2, transitions, rewards, 0.95, terminal=2)


@pytest.fixture
def branch_mdp():
    """
    Two decision states where the actions differ

    Q*(s0) = [3.7, 2.0] and Q*(s1) = [3.0, 0.0] at gamma 0.9.
    """
    transitions = np.zeros((3, 2, 3))
    transitions[0, 0, 1] = 1.0
    transitions[0, 1, 2] = 1.0
    transitions[1, :, 2] = 1.0
    transitions[2, :, 2] = 1.0
    rewards = np.array([[1.0, 2.0], [3.0, 0.0], [0.0, 0.0]])
    return TabularMdp(3, 2, transitions, rewards, 0.9, terminal=2)


@pytest.fixture
def small_env():
    return generate_env(EnvSpec(n_decision_states=4, n_actions=3, seed=11))
