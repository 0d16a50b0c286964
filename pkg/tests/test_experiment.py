import csv
import json

import pytest

from sparta.errors import ConfigError
from sparta.experiment import (
    ExperimentConfig,
    run_experiment,
    write_report_csv,
    write_report_json,
)


def tiny_config(trials=2, extra_rows=(), seed=0):
    rows = [
        {"name": "ours_a09_n3", "kind": "fourier_fit", "alpha": 0.9, "n": 3, "risk_threshold": 0.85},
        {"name": "elev", "kind": "elev"},
    ] + list(extra_rows)
    return {
        "terrain": {
            "kind": "obstacle_row",
            "width_cells": 52, "depth_cells": 36, "num_obstacles": 4,
            "obstacle_height_range": [0.5, 0.58], "resolution": 0.1,
            "obstacle_width_m": 1.0, "gap_m": 0.2,
        },
        "trials": trials,
        "trial_mode": "terrains",
        "seed": seed,
        "planner": {"cell_size": 0.4, "patch_side": 1.2},
        "fit": {"fit_angles": 16, "draws": 64, "epochs": 60, "learning_rate": 40.0},
        "algorithms": rows,
    }


class TestConfigValidation:
    def test_zero_trials_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(tiny_config(trials=0))

    def test_unknown_terrain_kind(self):
        cfg = tiny_config()
        cfg["terrain"]["kind"] = "volcano"
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(cfg)

    def test_unknown_algorithm_kind(self):
        cfg = tiny_config(extra_rows=[{"name": "x", "kind": "magic"}])
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(cfg)

    def test_fourier_fit_needs_n(self):
        cfg = tiny_config(extra_rows=[{"name": "x", "kind": "fourier_fit", "alpha": 0.5}])
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(cfg)

    def test_checkpoint_row_needs_path(self):
        cfg = tiny_config(extra_rows=[{"name": "x", "kind": "sparta_checkpoint", "alpha": 0.5}])
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(cfg)


class TestRunExperiment:
    def test_rows_and_counts(self):
        report = run_experiment(tiny_config(trials=2))
        assert len(report.rows) == 2
        for row in report.rows:
            assert row["successes"] + row["damages"] == 2

    def test_deterministic(self):
        a = run_experiment(tiny_config(trials=2))
        b = run_experiment(tiny_config(trials=2))
        assert a.rows == b.rows
        assert a.orderings == b.orderings

    def test_ordering_flags_exist(self):
        report = run_experiment(tiny_config(trials=2))
        assert set(report.orderings) == {"cvar_tail_ge_mean", "n3_ge_n1", "ours_ge_elev_plus_10pts"}
        # flags needing missing rows are None
        assert report.orderings["n3_ge_n1"] is None

    def test_rollout_mode(self):
        cfg = tiny_config(trials=5)
        cfg["trial_mode"] = "rollouts"
        report = run_experiment(cfg)
        for row in report.rows:
            assert row["successes"] + row["damages"] == 5


class TestReportEmission:
    def test_csv_layout(self, tmp_path):
        report = run_experiment(tiny_config(trials=2))
        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["algorithm", "alpha", "n", "successes", "damages", "success_rate"]
        assert len(rows) == 3
        assert rows[1][0] == "ours_a09_n3"

    def test_json_layout(self, tmp_path):
        report = run_experiment(tiny_config(trials=2))
        path = tmp_path / "report.json"
        write_report_json(report, path)
        data = json.loads(path.read_text())
        assert set(data) == {"config", "rows", "orderings", "trials"}
        assert len(data["trials"]) == 4  # 2 trials x 2 algorithms
