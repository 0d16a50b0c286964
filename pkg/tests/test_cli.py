import json

import numpy as np
import pytest

from sparta.cli import main
from sparta.model import build_model, load_model
from sparta.terrain import load_terrain, save_terrain, gen_obstacle_row


def run_cli(*args):
    return main([str(a) for a in args])


def gen_small(out, seed=0, kind="obstacle_row"):
    return run_cli(
        "gen", "--kind", kind, "--width-cells", 32, "--depth-cells", 28,
        "--num-obstacles", 2, "--resolution", 0.1, "--patches", 3, "--angles", 8,
        "--draws", 50, "--seed", seed, "--out", out, "--no-figures",
    )


class TestGen:
    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert gen_small(a) == 0 and gen_small(b) == 0
        for name in ("terrain.json", "terrain.bin", "dataset.jsonl", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_boulder_length_flag(self, tmp_path):
        out = tmp_path / "bf"
        code = run_cli(
            "gen", "--kind", "boulder_field", "--length", 40, "--width", 4,
            "--density", 0.2, "--resolution", 0.1, "--patches", 2, "--angles", 4,
            "--draws", 30, "--out", out, "--no-figures",
        )
        assert code == 0
        t = load_terrain(out / "terrain.json")
        assert t.rows * t.resolution == pytest.approx(40.0)

    def test_missing_kind_exits_2(self, tmp_path, capsys):
        assert run_cli("gen", "--out", tmp_path / "x") == 2
        assert "kind" in capsys.readouterr().err

    def test_manifest_rerun_byte_exact(self, tmp_path):
        first = tmp_path / "first"
        assert gen_small(first, seed=3) == 0
        second = tmp_path / "second"
        assert run_cli("gen", "--config", first / "manifest.json", "--out", second) == 0
        for name in ("terrain.json", "terrain.bin", "dataset.jsonl", "manifest.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name


class TestFit:
    def test_outputs(self, tmp_path):
        terr_dir = tmp_path / "g"
        assert gen_small(terr_dir) == 0
        out = tmp_path / "fit"
        code = run_cli(
            "fit", "--terrain", terr_dir / "terrain.json", "--center-x", 1.6,
            "--center-y", 1.4, "--angles", 8, "--draws", 60, "--max-frequency", 3,
            "--epochs", 40, "--out", out, "--no-figures",
        )
        assert code == 0
        fn = json.loads((out / "risk_function.json").read_text())
        assert fn["num_bins"] == 8 and fn["max_frequency"] == 3
        lines = (out / "loss.csv").read_text().strip().splitlines()
        assert lines[0] == "epoch,train_emd2,test_emd2"
        assert len(lines) == 41

    def test_too_few_angles_underdetermined(self, tmp_path, capsys):
        terr_dir = tmp_path / "g"
        assert gen_small(terr_dir) == 0
        code = run_cli(
            "fit", "--terrain", terr_dir / "terrain.json", "--center-x", 1.6,
            "--center-y", 1.4, "--angles", 5, "--max-frequency", 3,
            "--out", tmp_path / "fit2", "--no-figures",
        )
        assert code == 2


class TestTrain:
    def make_dataset(self, tmp_path):
        out = tmp_path / "gen"
        assert gen_small(out) == 0
        return out / "dataset.jsonl"

    def test_zero_lr_checkpoint_equals_init(self, tmp_path):
        data = self.make_dataset(tmp_path)
        out = tmp_path / "train"
        code = run_cli(
            "train", "--dataset", data, "--head", "sparta", "--lr", 0.0,
            "--epochs", 2, "--holdout", 0.0, "--seed", 5, "--out", out, "--no-figures",
        )
        assert code == 0
        trained = load_model(out / "checkpoint.json")
        init = build_model("sparta", seed=5, weight_init_scale=2.449489742783178)
        for a, b in zip(trained.trunk.layers + trained.head.layers,
                        init.trunk.layers + init.head.layers):
            assert np.array_equal(a.weights, b.weights)
            assert np.array_equal(a.biases, b.biases)

    def test_sparta_head_dim_56(self, tmp_path):
        data = self.make_dataset(tmp_path)
        out = tmp_path / "t56"
        code = run_cli(
            "train", "--dataset", data, "--head", "sparta", "--bins", 8,
            "--max-frequency", 3, "--epochs", 1, "--out", out, "--no-figures",
        )
        assert code == 0
        ckpt = json.loads((out / "checkpoint.json").read_text())
        assert ckpt["head"]["layers"][-1]["out_dim"] == 56

    def test_same_seed_same_csv(self, tmp_path):
        data = self.make_dataset(tmp_path)
        a, b = tmp_path / "ta", tmp_path / "tb"
        for out in (a, b):
            assert run_cli(
                "train", "--dataset", data, "--head", "angle_free", "--epochs", 3,
                "--seed", 4, "--out", out, "--no-figures",
            ) == 0
        assert (a / "loss.csv").read_bytes() == (b / "loss.csv").read_bytes()

    def test_missing_dataset_exits_3(self, tmp_path):
        code = run_cli(
            "train", "--dataset", tmp_path / "nope.jsonl", "--out", tmp_path / "x",
            "--no-figures",
        )
        assert code == 3

    def test_corrupt_dataset_exits_3(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{not json}\n")
        code = run_cli("train", "--dataset", bad, "--out", tmp_path / "x", "--no-figures")
        assert code == 3


class TestPlan:
    def make_flat_terrain(self, tmp_path):
        t = gen_obstacle_row(40, 36, 0, (0.1, 0.2), 0.1, seed=0)
        path = tmp_path / "flat.json"
        save_terrain(t, path)
        return path

    def test_flat_plan_full_success(self, tmp_path):
        terr = self.make_flat_terrain(tmp_path)
        out = tmp_path / "plan"
        code = run_cli(
            "plan", "--terrain", terr, "--fourier-fit", "--fit-epochs", 60,
            "--fit-draws", 64, "--trials", 100, "--out", out, "--no-figures",
        )
        assert code == 0
        result = json.loads((out / "plan.json").read_text())
        assert result["rollout"]["successes"] == 100
        csv_line = (out / "rollout.csv").read_text().strip().splitlines()[1]
        assert csv_line.startswith("100,100,0,")

    def test_infeasible_exits_4(self, tmp_path, capsys):
        t = gen_obstacle_row(40, 36, 0, (0.1, 0.2), 0.1, seed=0)
        t.heights[16:21, :] = 0.45  # unbroken wall
        path = tmp_path / "wall.json"
        save_terrain(t, path)
        code = run_cli(
            "plan", "--terrain", path, "--fourier-fit", "--fit-epochs", 60,
            "--fit-draws", 64, "--threshold", 0.3, "--trials", 5,
            "--out", tmp_path / "p2", "--no-figures",
        )
        assert code == 4
        err = capsys.readouterr().err
        assert json.loads(err.strip())["error"] == "no_path"


class TestExperimentCmd:
    def test_grid_rows_plus_baselines(self, tmp_path):
        config = {
            "terrain": {
                "kind": "obstacle_row",
                "width_cells": 52, "depth_cells": 36, "num_obstacles": 4,
                "obstacle_height_range": [0.5, 0.58], "resolution": 0.1,
                "obstacle_width_m": 1.0, "gap_m": 0.2,
            },
            "trials": 1,
            "trial_mode": "terrains",
            "seed": 0,
            "planner": {"cell_size": 0.4, "patch_side": 1.2},
            "fit": {"fit_angles": 16, "draws": 48, "epochs": 50, "learning_rate": 40.0},
            "algorithms": [
                {"name": f"ours_a{a}_n{n}", "kind": "fourier_fit", "alpha": a, "n": n,
                 "risk_threshold": 0.85}
                for a in (0.0, 0.9) for n in (1, 3, 5)
            ] + [{"name": "elev", "kind": "elev"}],
        }
        cfg_path = tmp_path / "exp.json"
        cfg_path.write_text(json.dumps(config))
        out = tmp_path / "exp"
        assert run_cli("experiment", "--config", cfg_path, "--out", out, "--no-figures") == 0
        lines = (out / "report.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 6 + 1  # header + grid + elev
        report = json.loads((out / "report.json").read_text())
        assert len(report["rows"]) == 7

    def test_trials_zero_exits_2(self, tmp_path):
        cfg = {"terrain": {"kind": "obstacle_row"}, "trials": 0, "algorithms": [
            {"name": "elev", "kind": "elev"}]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(cfg))
        assert run_cli("experiment", "--config", path, "--out", tmp_path / "x") == 2


class TestSweep:
    def test_csv_schema(self, tmp_path):
        terr_dir = tmp_path / "g"
        assert gen_small(terr_dir) == 0
        out = tmp_path / "sweep"
        code = run_cli(
            "cvar-sweep", "--terrain", terr_dir / "terrain.json", "--center-x", 1.6,
            "--center-y", 1.4, "--steps", 32, "--fit-epochs", 40, "--fit-draws", 48,
            "--out", out, "--no-figures",
        )
        assert code == 0
        lines = (out / "cvar_sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "phi,cvar"
        assert len(lines) == 33
        phi0, c0 = lines[1].split(",")
        assert float(phi0) == 0.0
        assert 0.0 <= float(c0) <= 1.0
