"""Tests for experiment configuration, the harness and its output files."""

import json
import re

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from bayes_itl.core import save_mdp
from bayes_itl.errors import ConfigError, ExperimentFailedError, RowDrawLimitError
from bayes_itl.experiments import ExperimentConfig, emit_outputs, format_cell, harness, run_experiment
from bayes_itl.experiments.outputs import (
    ACCURACY_TABLE,
    PER_DATASET,
    Q_STAR_TABLE,
    SUMMARY_JSON,
    SUMMARY_TABLE,
)


@pytest.fixture
def mini_config(tmp_path, small_env):
    env_path = save_mdp(small_env, tmp_path / "env.json")
    return ExperimentConfig(
        env_path=str(env_path),
        epsilons=[0.0],
        episode_counts=[15],
        n_datasets=2,
        n_posterior_samples=10,
        master_seed=3,
    )


@pytest.fixture
def mini_report(mini_config):
    return run_experiment(mini_config)


def test_mini_experiment_records(mini_report, small_env):
    frame = mini_report.frame()

    assert len(frame) == 8
    assert list(frame["method"].astype(str)[:4]) == ["expert", "mle", "posterior", "constrained"]
    assert mini_report.flagged == []
    assert mini_report.total_runs == 2
    assert mini_report.provenance["env_fingerprint"] == small_env.fingerprint


def test_expert_scores_zero_at_exact_optimum(mini_report):
    np.testing.assert_allclose(mini_report.values("expert", 0.0, 15), 0.0, atol=1e-9)


def test_constrained_method_keeps_expert_guarantees(mini_report):
    frame = mini_report.frame()
    constrained = frame[frame["method"] == "constrained"]

    assert (constrained["deterministic_accuracy"] == 100.0).all()
    assert constrained["mistake_ball_rate"].isna().all()
    assert (constrained["acceptance_rate"] > 0.0).all()


def test_summary_uses_population_std(mini_report):
    summary = mini_report.summary()
    row = summary[summary["method"] == "posterior"].iloc[0]
    values = mini_report.values("posterior", 0.0, 15)

    assert row["n_datasets"] == 2
    assert row["q_star_metric_mean"] == pytest.approx(values.mean())
    assert row["q_star_metric_std"] == pytest.approx(values.std(ddof=0))


def test_results_do_not_depend_on_jobs(mini_config, mini_report):
    parallel = run_experiment(mini_config, jobs=2)
    pd.testing.assert_frame_equal(mini_report.frame(), parallel.frame())


def test_outputs_are_byte_identical(tmp_path, mini_report):
    first = emit_outputs(mini_report, tmp_path / "first")
    second = emit_outputs(mini_report, tmp_path / "second")

    assert [p.relative_to(tmp_path / "first") for p in first] == \
           [p.relative_to(tmp_path / "second") for p in second]
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_output_tables(tmp_path, mini_report):
    out = tmp_path / "out"
    emit_outputs(mini_report, out)

    accuracy = pd.read_csv(out / ACCURACY_TABLE, keep_default_na=False)
    assert list(accuracy.columns) == ["episodes", "epsilon", "method", "deterministic",
                                      "stochastic", "a_in_epsilon_ball"]
    assert (accuracy["stochastic"] == "N/A").all()
    assert accuracy.loc[accuracy["method"] == "expert", "deterministic"].item() == "100.00 ± 0.00"

    q_table = pd.read_csv(out / Q_STAR_TABLE)
    assert "epsilon=0" in q_table.columns
    assert len(pd.read_csv(out / SUMMARY_TABLE)) == 4

    summary = json.loads((out / SUMMARY_JSON).read_text())
    assert summary["provenance"]["config_hash"] == mini_report.config.config_hash()
    assert summary["total_runs"] == 2
    assert all(cell["stochastic_accuracy_mean"] is None for cell in summary["cells"])


def test_histogram_bins_match_per_dataset_values(tmp_path, mini_report):
    out = tmp_path / "out"
    emit_outputs(mini_report, out)
    per_dataset = pd.read_csv(out / PER_DATASET)

    for method in ("expert", "mle", "posterior", "constrained"):
        svg = (out / "figures" / f"q_star_metric_{method}_eps0_k15.svg").read_text()
        counts = [int(c) for c in re.findall(rf'id="bin-{method}-\d+-(\d+)"', svg)]
        assert len(counts) == 20
        assert sum(counts) == (per_dataset["method"] == method).sum()


def test_flagged_datasets_fail_the_experiment(mini_config, monkeypatch):
    def infeasible(*args, **kwargs):
        raise RowDrawLimitError(0, 1, (1.0, np.inf), 10)

    monkeypatch.setattr(harness, "sample_constrained", infeasible)
    config = mini_config.model_copy(update={"max_flag_fraction": 0.0})

    with pytest.raises(ExperimentFailedError) as info:
        run_experiment(config)

    error = info.value
    assert (error.flagged, error.total) == (2, 2)
    assert {f["error"] for f in error.report.flagged} == {"RowDrawLimitError"}
    assert set(error.report.frame()["method"].astype(str)) == {"expert", "mle", "posterior"}


def test_flags_within_budget_are_reported(mini_config, monkeypatch):
    def infeasible(*args, **kwargs):
        raise RowDrawLimitError(0, 1, (1.0, np.inf), 10)

    monkeypatch.setattr(harness, "sample_constrained", infeasible)
    report = run_experiment(mini_config.model_copy(update={"max_flag_fraction": 1.0}))
    assert report.flagged_runs == 2


def test_format_cell():
    assert format_cell(1.234, 0.5) == "1.23 ± 0.50"
    assert format_cell(float("nan"), float("nan")) == "N/A"


@pytest.mark.parametrize("overrides", [
    {"methods": []},
    {"methods": ["mle", "mle"]},
    {"methods": ["bayes"]},
    {"epsilons": [-1.0]},
    {"epsilons": [0.0, 0.0]},
    {"episode_counts": [0]},
    {"n_datasets": 0},
    {"unknown": 1},
    {"sampler": {"ball_source": "v_star"}},
])
def test_experiment_config_validation(overrides):
    with pytest.raises(ValidationError):
        ExperimentConfig(**overrides)


def test_experiment_config_files(tmp_path):
    yaml_path = tmp_path / "exp.yaml"
    yaml_path.write_text("epsilons: [0.0, 3.0]\nepisode_counts: [15]\nsampler:\n  ball_source: q-expert\n")
    config = ExperimentConfig.from_file(yaml_path)
    assert config.epsilons == [0.0, 3.0]
    assert config.sampler.ball_source == "q_expert"

    json_path = tmp_path / "exp.json"
    json_path.write_text(json.dumps({"n_datasets": 5, "out_dir": "results/a"}))
    from_json = ExperimentConfig.from_file(json_path)
    assert from_json.n_datasets == 5
    assert from_json.config_hash() == from_json.model_copy(update={"out_dir": "elsewhere"}).config_hash()
    assert from_json.config_hash() != from_json.model_copy(update={"master_seed": 1}).config_hash()

    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "missing.json")
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "list.json")


def test_experiment_config_from_toolkit_config(isolated_config):
    config = ExperimentConfig.from_config(isolated_config, n_datasets=3)
    assert config.n_datasets == 3
    assert config.targets == {0.0: 0, 3.0: 3, 4.0: 6}
    assert config.env_spec["reward_high"] == 15.0
    assert config.sampler.equality_mode == "pin"


def test_package_factories(tmp_path):
    import bayes_itl

    path = tmp_path / "exp.yaml"
    path.write_text("n_datasets: 4\nepsilons: [0.0, 3.0]\n")
    from_file = bayes_itl.create_experiment_config(path, master_seed=9)
    assert from_file.n_datasets == 4
    assert from_file.master_seed == 9

    with pytest.raises(ValidationError):
        bayes_itl.create_experiment_config(path, n_datasets=0)
    with pytest.raises(ValidationError):
        bayes_itl.create_experiment_config(path, methods=[])

    defaults = bayes_itl.create_experiment_config(n_datasets=2)
    assert defaults.n_datasets == 2
    assert defaults.episode_counts == [15, 300]

    manager = bayes_itl.create_dataset_manager(tmp_path / "batches", compress=True)
    assert manager.data_dir.is_dir()
    assert manager.batch_path(3).name == "batch_0003.json.gz"


def test_toolkit_config_bounds_match_sampler_settings(isolated_config):
    assert isolated_config.validate() == []

    isolated_config.set("sampler.gap_factor", 1.0)
    isolated_config.set("sampler.window_factor", 1.0)
    assert isolated_config.validate() == []

    isolated_config.set("sampler.gap_factor", 0.9)
    isolated_config.set("env.reference_seed", -1)
    errors = isolated_config.validate()
    assert "sampler.gap_factor must be at least 1" in errors
    assert "env.reference_seed must be a non-negative integer" in errors
