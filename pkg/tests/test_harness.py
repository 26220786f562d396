import math
import os
from pathlib import Path

import pandas as pd
import pytest

from src.config import ConfigError, ExperimentConfig, LandscapeBlock, load, loads
from src.harness import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    RUN_COLUMNS,
    aggregate,
    batch_statistics,
    parse_value,
    run_experiment,
    sweep,
    two_proportion_z,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

ORG = """\
study: org-search
replications: 1
seed: 3
search:
  discovery_budget: 2
organization:
  unit_sizes: [2, 2]
  periods: 1
"""

NK = """\
study: nk-analysis
replications: 5
seed: 12
landscape:
  n: 10
  k: 3
search:
  discovery_budget: 10
"""


def _config(text, out, **overrides):
    return loads(text).with_overrides(output_dir=str(out), **overrides)


def test_one_period_run_has_two_rows(tmp_path):
    """
    Period 0 plus one search period, and all three output files.
    """
    result = run_experiment(_config(ORG, tmp_path / "out"), quiet=True)
    assert result.exit_code == EXIT_OK
    assert len(result.runs) == 2
    assert list(result.runs.columns) == RUN_COLUMNS["org-search"]
    names = sorted(os.path.basename(f) for f in result.files)
    assert names == ["landscape.txt", "runs.csv", "summary.csv"]


def test_reruns_are_byte_identical(tmp_path):
    first = run_experiment(_config(NK, tmp_path / "a"), quiet=True)
    second = run_experiment(_config(NK, tmp_path / "b"), quiet=True)
    for name in ("runs.csv", "summary.csv", "landscape.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert first.exit_code == second.exit_code == EXIT_OK


def test_more_replications_keep_existing_rows(tmp_path):
    small = run_experiment(_config(ORG, tmp_path / "a", replications=2), quiet=True)
    large = run_experiment(_config(ORG, tmp_path / "b", replications=3), quiet=True)
    pd.testing.assert_frame_equal(large.runs.iloc[:len(small.runs)], small.runs)


def test_worker_pool_matches_serial_run(tmp_path):
    serial = run_experiment(_config(ORG, tmp_path / "serial", replications=4), quiet=True)
    pooled = run_experiment(_config(ORG, tmp_path / "pooled", replications=4, workers=2), quiet=True)
    assert pooled.exit_code == EXIT_OK
    assert (tmp_path / "serial" / "runs.csv").read_bytes() == (tmp_path / "pooled" / "runs.csv").read_bytes()
    pd.testing.assert_frame_equal(serial.runs, pooled.runs)


def test_aggregating_files_reproduces_the_in_process_summary(tmp_path):
    result = run_experiment(_config(NK, tmp_path / "out"), quiet=True)
    summary = aggregate([tmp_path / "out" / "runs.csv"])
    pd.testing.assert_frame_equal(summary.batch, result.summary.batch)
    assert summary.study == "nk-analysis"


def _org_rows(run_id, values):
    return pd.DataFrame({
        "run_id": run_id,
        "period": range(len(values)),
        "mode": "hierarchical",
        "value": values,
        "bits": "0101",
        "objectives": "0.5;0.5",
    })


def test_batch_statistics_over_terminal_values(tmp_path):
    """
    Terminal values 0.4 and 0.6: mean 0.5, sample sd 0.1414.
    """
    path = tmp_path / "runs.csv"
    pd.concat([_org_rows(0, [0.3, 0.4]), _org_rows(1, [0.5, 0.6])]).to_csv(path, index=False)
    final = aggregate([path]).metric("final_value")
    assert final["n"] == 2
    assert final["mean"] == pytest.approx(0.5)
    assert final["sd"] == pytest.approx(0.141421, abs=1e-6)
    assert final["ci95_half_width"] == pytest.approx(1.96 * 0.141421 / math.sqrt(2), abs=1e-6)


def test_aggregation_ignores_file_order(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _org_rows(1, [0.5, 0.6]).to_csv(a, index=False)
    _org_rows(0, [0.3, 0.4]).to_csv(b, index=False)
    forward, backward = aggregate([a, b]), aggregate([b, a])
    pd.testing.assert_frame_equal(forward.batch, backward.batch)
    pd.testing.assert_frame_equal(forward.replications, backward.replications)


def test_aggregation_rejects_foreign_columns(tmp_path):
    path = tmp_path / "runs.csv"
    _org_rows(0, [0.3, 0.4]).assign(extra=1).to_csv(path, index=False)
    with pytest.raises(ValueError, match="extra"):
        aggregate([path])


def test_aggregation_rejects_duplicate_replications(tmp_path):
    path = tmp_path / "runs.csv"
    _org_rows(0, [0.3, 0.4]).to_csv(path, index=False)
    with pytest.raises(ValueError, match="more than once"):
        aggregate([path, path])


def test_aggregation_rejects_mixed_studies(tmp_path):
    org, nk = tmp_path / "org.csv", tmp_path / "nk.csv"
    _org_rows(0, [0.3, 0.4]).to_csv(org, index=False)
    run_experiment(_config(NK, tmp_path / "nk", replications=1), quiet=True)
    with pytest.raises(ValueError, match="schema"):
        aggregate([org, tmp_path / "nk" / "runs.csv"])
    with pytest.raises(ValueError):
        aggregate([])


def test_batch_statistics_single_run():
    stats = batch_statistics([0.7])
    assert stats == {"n": 1, "mean": 0.7, "sd": 0.0, "ci95_half_width": 0.0}
    assert batch_statistics([math.nan])["n"] == 0


def test_sweep_over_k_raises_local_optima(tmp_path):
    """
    More interaction means more local optima: K in {0, 3, 9} at N = 10.
    """
    result = sweep(_config(NK, tmp_path / "sweep"), "landscape.k", [0, 3, 9], quiet=True)
    assert result.exit_code == EXIT_OK
    combined = result.combined
    optima = combined[combined["metric"] == "local_optima"].set_index("landscape.k")["mean"]
    assert optima[0] == 1.0
    assert optima[0] < optima[3] < optima[9]
    assert (tmp_path / "sweep" / "combined.csv").is_file()
    assert (tmp_path / "sweep" / "landscape.k=9" / "runs.csv").is_file()


def test_singleton_sweep_equals_a_plain_run(tmp_path):
    config = _config(NK, tmp_path / "sweep")
    result = sweep(config, "landscape.k", [3], quiet=True)
    plain = run_experiment(config.with_overrides(output_dir=str(tmp_path / "plain")), quiet=True)
    swept = result.combined.drop(columns=["landscape.k"])
    pd.testing.assert_frame_equal(swept, plain.summary.batch)


def test_sweep_rejects_empty_and_invalid_values(tmp_path):
    config = _config(NK, tmp_path / "sweep")
    with pytest.raises(ConfigError):
        sweep(config, "landscape.k", [], quiet=True)
    with pytest.raises(ConfigError):
        sweep(config, "landscape.k", [12], quiet=True)
    with pytest.raises(ConfigError):
        sweep(config, "landscape.zz", [1], quiet=True)


def test_parse_value_reads_yaml_scalars():
    assert parse_value("3") == 3
    assert parse_value("0.5") == 0.5
    assert parse_value("true") is True
    assert parse_value("hierarchical") == "hierarchical"


def test_unwritable_output_exits_with_io_code(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    result = run_experiment(_config(ORG, blocker / "out"), quiet=True)
    assert result.exit_code == EXIT_IO


def test_invalid_config_stops_before_simulating(tmp_path):
    config = ExperimentConfig(study="nk-analysis", landscape=LandscapeBlock(n=30, k=2),
                              output_dir=str(tmp_path / "out"))
    result = run_experiment(config, quiet=True)
    assert result.exit_code == EXIT_CONFIG
    assert result.runs is None
    assert not (tmp_path / "out").exists()


def test_ring_diffusion_experiment(tmp_path):
    config = load(CONFIG_DIR / "ca.yaml").with_overrides(output_dir=str(tmp_path / "ca"))
    result = run_experiment(config, quiet=True)
    assert result.exit_code == EXIT_OK
    assert result.summary.metric("adoption_time")["mean"] == 5.0
    assert result.summary.metric("final_count_1")["mean"] == 11.0
    assert (tmp_path / "ca" / "grid_0000.csv").read_text() == "1,0,0,0,0,0,0,0,0,0,0\n"
    assert (tmp_path / "ca" / "grid_0006.csv").is_file()


def test_growth_experiment_rows(tmp_path):
    text = """\
study: growth-study
replications: 2
seed: 4
organization:
  unit_sizes: [2, 2]
learning:
  interval: 2
growth:
  periods: [3]
  n_add: 2
  horizon: 6
"""
    result = run_experiment(_config(text, tmp_path / "grow"), quiet=True)
    assert result.exit_code == EXIT_OK
    runs = result.runs
    assert list(runs.columns) == RUN_COLUMNS["growth-study"]
    assert runs.groupby("run_id")["N_current"].last().tolist() == [6, 6]
    terminal = sum(result.summary.metric(f"terminal_{m}")["mean"]
                   for m in ("decentralized", "sequential-lateral", "hierarchical"))
    assert terminal == pytest.approx(1.0)


def test_hidden_action_experiment_round_trips_through_csv(tmp_path):
    text = "study: hidden-action\nreplications: 2\nseed: 8\nhidden_action:\n  horizon: 15\n"
    result = run_experiment(_config(text, tmp_path / "ha"), quiet=True)
    assert result.exit_code == EXIT_OK
    assert len(result.runs) == 30
    again = aggregate([tmp_path / "ha" / "runs.csv"])
    pd.testing.assert_frame_equal(again.batch, result.summary.batch)


def test_two_proportion_z():
    z, p = two_proportion_z(60, 100, 40, 100)
    assert z == pytest.approx(2.828, abs=1e-3)
    assert p == pytest.approx(0.00468, abs=1e-4)
    assert two_proportion_z(0, 10, 0, 10) == (0.0, 1.0)
    with pytest.raises(ValueError):
        two_proportion_z(11, 10, 0, 10)
