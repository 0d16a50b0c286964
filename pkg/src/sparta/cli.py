"""Command-line surface: gen, fit, train, plan, experiment, bench, cvar-sweep.

Every run writes a manifest (resolved config + package version + seed)
beside its outputs; rerunning any command with `--config manifest.json`
reproduces all non-timing outputs byte-exactly.  Reports are CSV/JSON with
matplotlib figures rendered alongside unless --no-figures is given.

Exit codes: 0 ok, 2 usage/config, 3 data file problem, 4 no feasible path.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import run_bench
from .cache import CoefficientCache
from .errors import (
    BoundsError,
    ConfigError,
    FormatError,
    GenerationError,
    NoPath,
    SpartaError,
    UnderdeterminedFit,
)
from .experiment import (
    ExperimentConfig,
    run_experiment,
    write_report_csv,
    write_report_json,
)
from .features import patch_features
from .fourier import TWO_PI, save_risk_function
from .model import (
    Dataset,
    DatasetItem,
    TrainConfig,
    build_model,
    dataset_from_jsonl,
    dataset_to_jsonl,
    fit_patch_direct,
    load_model,
    save_model,
    train,
)
from .planner import (
    AngleInputModel,
    OracleFitModel,
    PlanQuery,
    SpartaPatchModel,
    build_lattice,
    derive_seed,
    evaluate_rollout,
    plan,
)
from .riskdist import CvarLevel, DEFAULT_GEOMETRY
from .terrain import (
    VehicleSpec,
    empirical_distribution,
    extract_patch,
    gen_boulder_field,
    gen_obstacle_row,
    load_terrain,
    save_terrain,
    save_terrain_binary,
)

log = logging.getLogger("sparta")

GEN_DEFAULTS = {
    "kind": None,
    "width_cells": 48,
    "depth_cells": 40,
    "num_obstacles": 6,
    "height_min": 0.45,
    "height_max": 0.58,
    "resolution": 0.1,
    "length": 40.0,
    "width": 8.0,
    "density": 0.5,
    "patches": 20,
    "angles": 8,
    "draws": 400,
    "patch_side": 1.2,
    "points_per_cell": 2,
    "seed": 0,
}

FIT_DEFAULTS = {
    "terrain": None,
    "center_x": None,
    "center_y": None,
    "patch_side": 1.2,
    "angles": 16,
    "draws": 400,
    "bins": 8,
    "max_frequency": 3,
    "epochs": 600,
    "lr": 40.0,
    "seed": 0,
}

TRAIN_DEFAULTS = {
    "dataset": None,
    "head": "sparta",
    "bins": 8,
    "max_frequency": 3,
    "epochs": 150,
    "lr": 0.05,
    "batch_size": 16,
    "holdout": 0.2,
    "weight_init_scale": 2.449489742783178,
    "seed": 0,
}

PLAN_DEFAULTS = {
    "terrain": None,
    "checkpoint": None,
    "fourier_fit": False,
    "alpha": 0.9,
    "threshold": 1.0,
    "distance_weight": 1.0,
    "risk_weight": 10.0,
    "cell_size": 0.4,
    "patch_side": 1.2,
    "start": None,
    "goal": None,
    "trials": 100,
    "damage_threshold": 0.8,
    "fit_angles": 16,
    "fit_draws": 200,
    "fit_epochs": 400,
    "fit_lr": 40.0,
    "seed": 0,
}

BENCH_DEFAULTS = {
    "sparta_checkpoint": None,
    "angle_checkpoint": None,
    "terrain": None,
    "queries": 100_000,
    "num_patches": 32,
    "patch_side": 1.2,
    "alpha": 0.9,
    "seed": 0,
}

SWEEP_DEFAULTS = {
    "terrain": None,
    "center_x": None,
    "center_y": None,
    "patch_side": 1.2,
    "checkpoint": None,
    "alpha": 0.9,
    "steps": 256,
    "fit_angles": 16,
    "fit_draws": 400,
    "fit_epochs": 600,
    "fit_lr": 40.0,
    "seed": 0,
}


def _write_manifest(out_dir: Path, command: str, cfg: dict) -> None:
    manifest = {"package_version": __version__, "command": command, "config": cfg}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _resolve_config(defaults: dict, config_path, cli_overrides: dict, command: str) -> dict:
    cfg = dict(defaults)
    if config_path:
        try:
            with open(config_path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if "config" in loaded and "command" in loaded:  # a manifest
            if loaded["command"] != command:
                raise ConfigError(
                    f"manifest is for {loaded['command']!r}, not {command!r}"
                )
            loaded = loaded["config"]
        unknown = set(loaded) - set(defaults) - {"no_figures", "seed"}
        if unknown and command != "experiment":
            raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(loaded)
    cfg.update(cli_overrides)
    return cfg


def _maybe_figures(cfg: dict) -> bool:
    return not cfg.get("no_figures", False)


# ---------------------------------------------------------------------------
# gen


def run_gen(cfg: dict, out_dir: Path) -> int:
    kind = cfg.get("kind")
    if kind not in ("obstacle_row", "boulder_field"):
        raise ConfigError(f"--kind must be obstacle_row or boulder_field, got {kind!r}")
    seed = int(cfg["seed"])
    if kind == "obstacle_row":
        terrain = gen_obstacle_row(
            width_cells=int(cfg["width_cells"]),
            depth_cells=int(cfg["depth_cells"]),
            num_obstacles=int(cfg["num_obstacles"]),
            obstacle_height_range=(float(cfg["height_min"]), float(cfg["height_max"])),
            resolution=float(cfg["resolution"]),
            seed=seed,
        )
    else:
        terrain = gen_boulder_field(
            length_m=float(cfg["length"]),
            width_m=float(cfg["width"]),
            density=float(cfg["density"]),
            resolution=float(cfg["resolution"]),
            seed=seed,
        )
    save_terrain(terrain, out_dir / "terrain.json")
    save_terrain_binary(terrain, out_dir / "terrain.bin")

    vehicle = VehicleSpec()
    patch_side = float(cfg["patch_side"])
    n_patches = int(cfg["patches"])
    n_angles = int(cfg["angles"])
    draws = int(cfg["draws"])
    rng = np.random.default_rng(seed)
    margin = patch_side / 2.0 + terrain.resolution
    items = []
    for p_idx in range(n_patches):
        cx = rng.uniform(terrain.origin[0] + margin, terrain.x_max() - margin)
        cy = rng.uniform(terrain.origin[1] + margin, terrain.y_max() - margin)
        patch = extract_patch(terrain, (cx, cy), patch_side)
        grid = patch_features(patch, int(cfg["points_per_cell"]), derive_seed(seed, "cloud", p_idx))
        for a_idx in range(n_angles):
            phi = a_idx * TWO_PI / n_angles
            target = empirical_distribution(
                patch, phi, vehicle, draws, DEFAULT_GEOMETRY,
                derive_seed(seed, "draws", p_idx, a_idx),
            )
            items.append(DatasetItem(grid=grid, phi=phi, target=target))
    dataset_to_jsonl(Dataset(items=items), out_dir / "dataset.jsonl")
    log.info("gen: terrain %dx%d, %d dataset items", terrain.rows, terrain.cols, len(items))
    return 0


# ---------------------------------------------------------------------------
# fit


def run_fit(cfg: dict, out_dir: Path) -> int:
    if not cfg.get("terrain") or cfg.get("center_x") is None or cfg.get("center_y") is None:
        raise ConfigError("fit needs --terrain, --center-x, --center-y")
    terrain = load_terrain(cfg["terrain"])
    patch = extract_patch(
        terrain, (float(cfg["center_x"]), float(cfg["center_y"])), float(cfg["patch_side"])
    )
    vehicle = VehicleSpec()
    seed = int(cfg["seed"])
    n_angles = int(cfg["angles"])
    phis = np.arange(n_angles) * TWO_PI / n_angles
    samples = [
        (
            float(phi),
            empirical_distribution(
                patch, float(phi), vehicle, int(cfg["draws"]), DEFAULT_GEOMETRY,
                derive_seed(seed, "fitdraws", i),
            ),
        )
        for i, phi in enumerate(phis)
    ]
    fit_cfg = TrainConfig(
        learning_rate=float(cfg["lr"]), epochs=int(cfg["epochs"]), batch_size=1, seed=seed
    )
    fn, trace = fit_patch_direct(
        samples, n=int(cfg["max_frequency"]), B=int(cfg["bins"]), cfg=fit_cfg, return_trace=True
    )
    save_risk_function(fn, out_dir / "risk_function.json")
    with open(out_dir / "loss.csv", "w") as fh:
        fh.write("epoch,train_emd2,test_emd2\n")
        for e, v in enumerate(trace, start=1):
            fh.write(f"{e},{v!r},\n")
    if _maybe_figures(cfg):
        from .plots import render_loss_curves

        render_loss_curves(list(range(1, len(trace) + 1)), trace, None, out_dir / "loss.png")
    log.info("fit: final EMD^2 %.5f over %d angles", trace[-1], n_angles)
    return 0


# ---------------------------------------------------------------------------
# train


def run_train(cfg: dict, out_dir: Path) -> int:
    if not cfg.get("dataset"):
        raise ConfigError("train needs --dataset")
    dataset = dataset_from_jsonl(cfg["dataset"])
    head = cfg["head"]
    if head not in ("sparta", "angle_input", "angle_free"):
        raise ConfigError(f"--head must be sparta, angle_input or angle_free, got {head!r}")
    seed = int(cfg["seed"])
    holdout_frac = float(cfg["holdout"])
    items = dataset.items
    heldout = None
    if holdout_frac > 0 and len(items) >= 5:
        rng = np.random.default_rng(derive_seed(seed, "holdout"))
        perm = rng.permutation(len(items))
        n_hold = max(1, int(round(holdout_frac * len(items))))
        hold_idx = set(perm[:n_hold].tolist())
        heldout = Dataset(items=[items[i] for i in sorted(hold_idx)])
        dataset = Dataset(items=[items[i] for i in range(len(items)) if i not in hold_idx])
    model = build_model(
        head_kind=head,
        bins=int(cfg["bins"]),
        max_frequency=int(cfg["max_frequency"]),
        geometry=dataset.geometry,
        seed=seed,
        weight_init_scale=float(cfg["weight_init_scale"]),
    )
    tc = TrainConfig(
        learning_rate=float(cfg["lr"]),
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch_size"]),
        seed=seed,
        weight_init_scale=float(cfg["weight_init_scale"]),
    )
    result = train(model, dataset, tc, heldout=heldout)
    save_model(result.model, out_dir / "checkpoint.json")
    with open(out_dir / "loss.csv", "w") as fh:
        fh.write("epoch,train_emd2,test_emd2\n")
        for e, v in enumerate(result.train_loss, start=1):
            test = result.heldout_loss[e - 1] if result.heldout_loss else ""
            test_s = repr(test) if test != "" else ""
            fh.write(f"{e},{v!r},{test_s}\n")
    if _maybe_figures(cfg):
        from .plots import render_loss_curves

        render_loss_curves(
            list(range(1, len(result.train_loss) + 1)),
            result.train_loss,
            result.heldout_loss,
            out_dir / "loss.png",
        )
    log.info("train[%s]: final train EMD^2 %.5f", head, result.train_loss[-1])
    return 0


# ---------------------------------------------------------------------------
# plan


def _build_plan_model(cfg: dict, vehicle: VehicleSpec):
    if cfg.get("fourier_fit"):
        fit_cfg = TrainConfig(
            learning_rate=float(cfg["fit_lr"]), epochs=int(cfg["fit_epochs"]), batch_size=1,
            seed=int(cfg["seed"]),
        )
        return OracleFitModel(
            vehicle=vehicle,
            max_frequency=3,
            fit_angles=int(cfg["fit_angles"]),
            draws=int(cfg["fit_draws"]),
            fit_cfg=fit_cfg,
            seed=int(cfg["seed"]),
        )
    if cfg.get("checkpoint"):
        model = load_model(cfg["checkpoint"])
        if model.head_kind == "sparta":
            return SpartaPatchModel(model, seed=int(cfg["seed"]))
        if model.head_kind == "angle_input":
            return AngleInputModel(model, seed=int(cfg["seed"]))
        raise ConfigError(f"cannot plan with head kind {model.head_kind!r}")
    raise ConfigError("plan needs --checkpoint or --fourier-fit")


def run_plan(cfg: dict, out_dir: Path) -> int:
    if not cfg.get("terrain"):
        raise ConfigError("plan needs --terrain")
    terrain = load_terrain(cfg["terrain"])
    vehicle = VehicleSpec()
    graph = build_lattice(
        terrain, float(cfg["cell_size"]), float(cfg["patch_side"]), terrain_id="plan"
    )
    start = tuple(cfg["start"]) if cfg.get("start") else (graph.nx // 2, 0)
    goal = tuple(cfg["goal"]) if cfg.get("goal") else (graph.nx // 2, graph.ny - 1)
    query = PlanQuery(
        start=start,
        goal=goal,
        alpha=CvarLevel(float(cfg["alpha"])),
        risk_threshold=float(cfg["threshold"]),
        distance_weight=float(cfg["distance_weight"]),
        risk_weight=float(cfg["risk_weight"]),
    )
    model = _build_plan_model(cfg, vehicle)
    cache = CoefficientCache() if hasattr(model, "risk_function") else None
    result = plan(graph, terrain, cache, model, query)
    stats = evaluate_rollout(
        terrain, result, graph, vehicle,
        trials=int(cfg["trials"]),
        damage_threshold=float(cfg["damage_threshold"]),
        seed=derive_seed(int(cfg["seed"]), "rollout"),
    )
    with open(out_dir / "plan.json", "w") as fh:
        json.dump(
            {
                "path": [list(p) for p in result.path],
                "total_distance": result.total_distance,
                "total_cost": result.total_cost,
                "max_edge_cvar": result.max_edge_cvar,
                "per_edge_cvar": result.per_edge_cvar,
                "rollout": {
                    "trials": stats.trials,
                    "successes": stats.successes,
                    "damages": stats.damages,
                },
            },
            fh,
            indent=2,
        )
    with open(out_dir / "rollout.csv", "w") as fh:
        fh.write("trials,successes,damages,success_rate\n")
        fh.write(f"{stats.trials},{stats.successes},{stats.damages},{stats.success_rate!r}\n")
    if _maybe_figures(cfg):
        from .plots import render_plan

        render_plan(terrain, [(result, "plan", graph)], True, out_dir / "plan.png")
    log.info(
        "plan: %d edges, max edge CVaR %.3f, rollout %d/%d",
        len(result.edges), result.max_edge_cvar, stats.successes, stats.trials,
    )
    return 0


# ---------------------------------------------------------------------------
# experiment


def run_experiment_cmd(cfg: dict, out_dir: Path) -> int:
    exp_cfg = ExperimentConfig.from_dict(cfg)
    report = run_experiment(exp_cfg)
    write_report_csv(report, out_dir / "report.csv")
    write_report_json(report, out_dir / "report.json")
    if _maybe_figures(cfg):
        from .plots import render_success_bars

        render_success_bars(report.rows, out_dir / "success_rates.png")
    for row in report.rows:
        log.info(
            "experiment: %-16s alpha=%-4s n=%-4s suc=%-4d dmg=%-4d",
            row["algorithm"], row["alpha"], row["n"], row["successes"], row["damages"],
        )
    return 0


# ---------------------------------------------------------------------------
# bench


def run_bench_cmd(cfg: dict, out_dir: Path) -> int:
    for key in ("sparta_checkpoint", "angle_checkpoint", "terrain"):
        if not cfg.get(key):
            raise ConfigError(f"bench needs --{key.replace('_', '-')}")
    sparta_model = load_model(cfg["sparta_checkpoint"])
    angle_model = load_model(cfg["angle_checkpoint"])
    if sparta_model.head_kind != "sparta" or angle_model.head_kind != "angle_input":
        raise ConfigError("bench needs a sparta checkpoint and an angle_input checkpoint")
    terrain = load_terrain(cfg["terrain"])
    report = run_bench(
        sparta_model,
        angle_model,
        terrain,
        num_patches=int(cfg["num_patches"]),
        queries=int(cfg["queries"]),
        patch_side=float(cfg["patch_side"]),
        alpha=float(cfg["alpha"]),
        seed=int(cfg["seed"]),
    )
    with open(out_dir / "bench.json", "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    log.info(
        "bench: cached %.0f q/s vs reinfer %.0f q/s (ratio %.1f)",
        report.cached_qps, report.reinfer_qps, report.ratio,
    )
    return 0


# ---------------------------------------------------------------------------
# cvar-sweep


def run_sweep(cfg: dict, out_dir: Path) -> int:
    if not cfg.get("terrain") or cfg.get("center_x") is None or cfg.get("center_y") is None:
        raise ConfigError("cvar-sweep needs --terrain, --center-x, --center-y")
    terrain = load_terrain(cfg["terrain"])
    vehicle = VehicleSpec()
    patch = extract_patch(
        terrain, (float(cfg["center_x"]), float(cfg["center_y"])), float(cfg["patch_side"])
    )
    if cfg.get("checkpoint"):
        model = load_model(cfg["checkpoint"])
        if model.head_kind != "sparta":
            raise ConfigError("cvar-sweep needs a sparta checkpoint (or none for oracle fit)")
        fn = SpartaPatchModel(model, seed=int(cfg["seed"])).risk_function(patch)
    else:
        fit_cfg = TrainConfig(
            learning_rate=float(cfg["fit_lr"]), epochs=int(cfg["fit_epochs"]), batch_size=1,
            seed=int(cfg["seed"]),
        )
        fn = OracleFitModel(
            vehicle=vehicle,
            fit_angles=int(cfg["fit_angles"]),
            draws=int(cfg["fit_draws"]),
            fit_cfg=fit_cfg,
            seed=int(cfg["seed"]),
        ).risk_function(patch)
    from .cache import query_risk

    steps = int(cfg["steps"])
    alpha = float(cfg["alpha"])
    phis = [i * TWO_PI / steps for i in range(steps)]
    cvars = [query_risk(fn, phi, alpha, DEFAULT_GEOMETRY) for phi in phis]
    with open(out_dir / "cvar_sweep.csv", "w") as fh:
        fh.write("phi,cvar\n")
        for phi, c in zip(phis, cvars):
            fh.write(f"{phi!r},{c!r}\n")
    if _maybe_figures(cfg):
        from .plots import render_cvar_sweep

        render_cvar_sweep(phis, cvars, out_dir / "cvar_sweep.png", alpha=alpha)
    log.info("cvar-sweep: %d angles, CVaR range [%.3f, %.3f]", steps, min(cvars), max(cvars))
    return 0


# ---------------------------------------------------------------------------
# argument plumbing


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sub.add_argument("--out", default=None, help="output directory (default: out/<command>)")
    sub.add_argument("--config", default=None, help="JSON config or manifest to start from")
    sub.add_argument(
        "--no-figures", action="store_true", default=argparse.SUPPRESS,
        dest="no_figures", help="skip PNG rendering",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparta",
        description="Angle-conditioned traversability risk: generate, fit, train, plan, benchmark.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen", help="generate terrain + oracle-labeled dataset")
    p.add_argument("--kind", choices=["obstacle_row", "boulder_field"], default=argparse.SUPPRESS)
    for flag, typ in [
        ("width-cells", int), ("depth-cells", int), ("num-obstacles", int),
        ("height-min", float), ("height-max", float), ("resolution", float),
        ("length", float), ("width", float), ("density", float),
        ("patches", int), ("angles", int), ("draws", int),
        ("patch-side", float), ("points-per-cell", int),
    ]:
        p.add_argument(f"--{flag}", type=typ, default=argparse.SUPPRESS,
                       dest=flag.replace("-", "_"))
    _add_common(p)

    p = subs.add_parser("fit", help="fit a Fourier risk function to one oracle-labeled patch")
    for flag, typ in [
        ("terrain", str), ("center-x", float), ("center-y", float), ("patch-side", float),
        ("angles", int), ("draws", int), ("bins", int), ("max-frequency", int),
        ("epochs", int), ("lr", float),
    ]:
        p.add_argument(f"--{flag}", type=typ, default=argparse.SUPPRESS,
                       dest=flag.replace("-", "_"))
    _add_common(p)

    p = subs.add_parser("train", help="train a risk model on a dataset")
    for flag, typ in [
        ("dataset", str), ("head", str), ("bins", int), ("max-frequency", int),
        ("epochs", int), ("lr", float), ("batch-size", int), ("holdout", float),
        ("weight-init-scale", float),
    ]:
        p.add_argument(f"--{flag}", type=typ, default=argparse.SUPPRESS,
                       dest=flag.replace("-", "_"))
    _add_common(p)

    p = subs.add_parser("plan", help="plan a risk-bounded path and roll it out")
    for flag, typ in [
        ("terrain", str), ("checkpoint", str), ("alpha", float), ("threshold", float),
        ("distance-weight", float), ("risk-weight", float), ("cell-size", float),
        ("patch-side", float), ("trials", int), ("damage-threshold", float),
        ("fit-angles", int), ("fit-draws", int), ("fit-epochs", int), ("fit-lr", float),
    ]:
        p.add_argument(f"--{flag}", type=typ, default=argparse.SUPPRESS,
                       dest=flag.replace("-", "_"))
    p.add_argument("--fourier-fit", action="store_true", default=argparse.SUPPRESS,
                   dest="fourier_fit", help="use oracle-labeled direct fits instead of a checkpoint")
    p.add_argument("--start", type=int, nargs=2, default=argparse.SUPPRESS)
    p.add_argument("--goal", type=int, nargs=2, default=argparse.SUPPRESS)
    _add_common(p)

    p = subs.add_parser("experiment", help="run an ablation experiment from a config")
    _add_common(p)

    p = subs.add_parser("bench", help="cached-query vs re-inference throughput")
    for flag, typ in [
        ("sparta-checkpoint", str), ("angle-checkpoint", str), ("terrain", str),
        ("queries", int), ("num-patches", int), ("patch-side", float), ("alpha", float),
    ]:
        p.add_argument(f"--{flag}", type=typ, default=argparse.SUPPRESS,
                       dest=flag.replace("-", "_"))
    _add_common(p)

    p = subs.add_parser("cvar-sweep", help="emit phi,cvar rows (and a polar plot) for one patch")
    for flag, typ in [
        ("terrain", str), ("center-x", float), ("center-y", float), ("patch-side", float),
        ("checkpoint", str), ("alpha", float), ("steps", int),
        ("fit-angles", int), ("fit-draws", int), ("fit-epochs", int), ("fit-lr", float),
    ]:
        p.add_argument(f"--{flag}", type=typ, default=argparse.SUPPRESS,
                       dest=flag.replace("-", "_"))
    _add_common(p)

    return parser


RUNNERS = {
    "gen": (run_gen, GEN_DEFAULTS),
    "fit": (run_fit, FIT_DEFAULTS),
    "train": (run_train, TRAIN_DEFAULTS),
    "plan": (run_plan, PLAN_DEFAULTS),
    "experiment": (run_experiment_cmd, {}),
    "bench": (run_bench_cmd, BENCH_DEFAULTS),
    "cvar-sweep": (run_sweep, SWEEP_DEFAULTS),
}


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SPARTA_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    runner, defaults = RUNNERS[command]

    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("command", "out", "config") and v is not None
    }
    out_arg = args.out
    try:
        cfg = _resolve_config(defaults, args.config, overrides, command)
        if command == "experiment" and "algorithms" not in cfg:
            raise ConfigError("experiment needs a --config file with terrain and algorithm rows")
        out_dir = Path(out_arg) if out_arg else Path("out") / command
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest_cfg = {k: v for k, v in cfg.items() if k != "out"}
        _write_manifest(out_dir, command, manifest_cfg)
        return runner(cfg, out_dir)
    except (ConfigError, UnderdeterminedFit, GenerationError, BoundsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NoPath as exc:
        print(json.dumps({"error": "no_path", "reason": str(exc)}), file=sys.stderr)
        return 4
    except SpartaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
