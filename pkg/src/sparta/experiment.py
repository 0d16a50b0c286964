"""Batch planning experiments: ablation grids over tail level and max frequency.

A configuration names the terrain generator, the algorithm rows to compare
(each an (algorithm kind, alpha, n) cell plus baselines), and the trial
budget.  Two trial modes exist: "terrains" plans on `trials` freshly seeded
terrain instances with one rollout each (obstacle-row style), "rollouts"
plans once and repeats seeded rollouts on a single terrain (boulder-field
style).  Rollout seeds are shared across algorithm rows so comparisons are
paired.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .cache import CoefficientCache
from .errors import ConfigError, NoPath
from .model import TrainConfig, load_model
from .planner import (
    AngleInputModel,
    OracleFitModel,
    OracleLabeler,
    PlanQuery,
    SpartaPatchModel,
    build_lattice,
    derive_seed,
    evaluate_rollout,
    plan,
    plan_elev_baseline,
)
from .riskdist import CvarLevel, DEFAULT_GEOMETRY
from .terrain import Terrain, VehicleSpec, gen_boulder_field, gen_obstacle_row

TERRAIN_KINDS = ("obstacle_row", "boulder_field")
ALGO_KINDS = ("fourier_fit", "sparta_checkpoint", "angle_input_checkpoint", "elev")


@dataclass
class AlgorithmRow:
    name: str
    kind: str
    alpha: Optional[float] = None
    n: Optional[int] = None
    checkpoint: Optional[str] = None
    risk_threshold: Optional[float] = None  # overrides the planner default

    def __post_init__(self):
        if self.kind not in ALGO_KINDS:
            raise ConfigError(f"unknown algorithm kind {self.kind!r}")
        if self.kind != "elev" and self.alpha is None:
            raise ConfigError(f"algorithm {self.name!r} needs an alpha")
        if self.kind == "fourier_fit" and self.n is None:
            raise ConfigError(f"algorithm {self.name!r} needs a max frequency n")
        if self.kind.endswith("_checkpoint") and not self.checkpoint:
            raise ConfigError(f"algorithm {self.name!r} needs a checkpoint path")


@dataclass
class ExperimentConfig:
    terrain: dict
    algorithms: List[AlgorithmRow]
    trials: int = 100
    trial_mode: str = "terrains"
    seed: int = 0
    damage_threshold: float = 0.8
    vehicle: dict = field(default_factory=dict)
    planner: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.trial_mode not in ("terrains", "rollouts"):
            raise ConfigError(f"unknown trial mode {self.trial_mode!r}")
        if self.terrain.get("kind") not in TERRAIN_KINDS:
            raise ConfigError(f"unknown terrain kind {self.terrain.get('kind')!r}")
        if not self.algorithms:
            raise ConfigError("need at least one algorithm row")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            rows = [AlgorithmRow(**row) for row in data["algorithms"]]
            return cls(
                terrain=dict(data["terrain"]),
                algorithms=rows,
                trials=data.get("trials", 100),
                trial_mode=data.get("trial_mode", "terrains"),
                seed=data.get("seed", 0),
                damage_threshold=data.get("damage_threshold", 0.8),
                vehicle=dict(data.get("vehicle", {})),
                planner=dict(data.get("planner", {})),
                fit=dict(data.get("fit", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc


def _gen_terrain(spec: dict, seed: int) -> Terrain:
    params = {k: v for k, v in spec.items() if k != "kind"}
    params["seed"] = seed
    for key in ("obstacle_height_range", "bump_height_range", "bump_radius_range", "kinds"):
        if key in params and isinstance(params[key], list):
            params[key] = tuple(params[key])
    if spec["kind"] == "obstacle_row":
        return gen_obstacle_row(**params)
    return gen_boulder_field(**params)


def _resolve_endpoints(planner_cfg: dict, graph) -> PlanQuery:
    start = planner_cfg.get("start", "auto")
    goal = planner_cfg.get("goal", "auto")
    if start == "auto":
        start = (graph.nx // 2, 0)
    if goal == "auto":
        goal = (graph.nx // 2, graph.ny - 1)
    return PlanQuery(
        start=tuple(start),
        goal=tuple(goal),
        alpha=CvarLevel(0.0),  # placeholder; replaced per algorithm row
        risk_threshold=planner_cfg.get("risk_threshold", 1.0),
        distance_weight=planner_cfg.get("distance_weight", 1.0),
        risk_weight=planner_cfg.get("risk_weight", 10.0),
    )


def _row_query(base: PlanQuery, row: AlgorithmRow) -> PlanQuery:
    alpha = row.alpha if row.alpha is not None else 0.0
    threshold = row.risk_threshold if row.risk_threshold is not None else base.risk_threshold
    return PlanQuery(
        start=base.start,
        goal=base.goal,
        alpha=CvarLevel(alpha),
        risk_threshold=threshold,
        distance_weight=base.distance_weight,
        risk_weight=base.risk_weight,
    )


class _ModelPool:
    """One risk model per algorithm row, reused across trials."""

    def __init__(self, cfg: ExperimentConfig, vehicle: VehicleSpec):
        fit_cfg = TrainConfig(
            learning_rate=cfg.fit.get("learning_rate", 40.0),
            epochs=cfg.fit.get("epochs", 400),
            batch_size=1,
            seed=cfg.fit.get("seed", 0),
        )
        labeler = OracleLabeler(
            vehicle,
            DEFAULT_GEOMETRY,
            fit_angles=cfg.fit.get("fit_angles", 16),
            draws=cfg.fit.get("draws", 200),
            seed=cfg.seed,
        )
        self._models: Dict[str, object] = {}
        for row in cfg.algorithms:
            if row.kind == "elev":
                continue
            if row.kind == "fourier_fit":
                model = OracleFitModel(
                    vehicle=vehicle,
                    max_frequency=row.n,
                    geometry=DEFAULT_GEOMETRY,
                    fit_cfg=fit_cfg,
                    seed=cfg.seed,
                    labeler=labeler,
                )
            elif row.kind == "sparta_checkpoint":
                model = SpartaPatchModel(load_model(row.checkpoint), seed=cfg.seed)
            else:
                model = AngleInputModel(load_model(row.checkpoint), seed=cfg.seed)
            self._models[row.name] = model

    def get(self, row: AlgorithmRow):
        return self._models.get(row.name)


@dataclass
class ExperimentReport:
    config: dict
    rows: List[dict]
    orderings: Dict[str, Optional[bool]]
    trial_detail: List[dict]


def run_experiment(config) -> ExperimentReport:
    """Run every algorithm row over the trial budget and tabulate outcomes."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    vehicle = VehicleSpec(**cfg.vehicle)
    pool = _ModelPool(cfg, vehicle)
    cell_size = cfg.planner.get("cell_size", 0.4)
    patch_side = cfg.planner.get("patch_side", 1.2)

    counts = {row.name: {"successes": 0, "damages": 0, "no_path": 0} for row in cfg.algorithms}
    detail: List[dict] = []

    if cfg.trial_mode == "terrains":
        trial_iter = [
            (t, _gen_terrain(cfg.terrain, derive_seed(cfg.seed, "terrain", t)), 1)
            for t in range(cfg.trials)
        ]
    else:
        trial_iter = [(0, _gen_terrain(cfg.terrain, cfg.seed), cfg.trials)]

    for t, terrain, rollouts in trial_iter:
        graph = build_lattice(terrain, cell_size, patch_side, terrain_id=f"trial{t}")
        base_query = _resolve_endpoints(cfg.planner, graph)
        rollout_seed = derive_seed(cfg.seed, "rollout", t)
        caches: Dict[object, CoefficientCache] = {}
        for row in cfg.algorithms:
            query = _row_query(base_query, row)
            try:
                if row.kind == "elev":
                    result = plan_elev_baseline(graph, terrain, query, vehicle)
                else:
                    model = pool.get(row)
                    cache = None
                    if hasattr(model, "risk_function"):
                        cache = caches.setdefault(id(model), CoefficientCache())
                    result = plan(graph, terrain, cache, model, query)
            except NoPath:
                counts[row.name]["no_path"] += rollouts
                counts[row.name]["damages"] += rollouts
                detail.append({"trial": t, "algorithm": row.name, "no_path": True})
                continue
            stats = evaluate_rollout(
                terrain,
                result,
                graph,
                vehicle,
                trials=rollouts,
                damage_threshold=cfg.damage_threshold,
                seed=rollout_seed,
            )
            counts[row.name]["successes"] += stats.successes
            counts[row.name]["damages"] += stats.damages
            detail.append(
                {
                    "trial": t,
                    "algorithm": row.name,
                    "successes": stats.successes,
                    "damages": stats.damages,
                    "path_cells": [list(p) for p in result.path],
                    "max_edge_cvar": result.max_edge_cvar,
                    "total_distance": result.total_distance,
                }
            )

    rows = []
    for row in cfg.algorithms:
        c = counts[row.name]
        total = c["successes"] + c["damages"]
        rows.append(
            {
                "algorithm": row.name,
                "alpha": row.alpha,
                "n": row.n,
                "successes": c["successes"],
                "damages": c["damages"],
                "no_path": c["no_path"],
                "success_rate": c["successes"] / total if total else 0.0,
            }
        )

    return ExperimentReport(
        config=_config_to_dict(cfg),
        rows=rows,
        orderings=_ordering_flags(rows),
        trial_detail=detail,
    )


def _config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "terrain": cfg.terrain,
        "algorithms": [
            {k: v for k, v in vars(row).items() if v is not None} for row in cfg.algorithms
        ],
        "trials": cfg.trials,
        "trial_mode": cfg.trial_mode,
        "seed": cfg.seed,
        "damage_threshold": cfg.damage_threshold,
        "vehicle": cfg.vehicle,
        "planner": cfg.planner,
        "fit": cfg.fit,
    }


def _find_rate(rows: List[dict], kind_name_prefix: str, alpha=None, n=None) -> Optional[float]:
    for r in rows:
        if not r["algorithm"].startswith(kind_name_prefix):
            continue
        if alpha is not None and r["alpha"] != alpha:
            continue
        if n is not None and r["n"] != n:
            continue
        return r["success_rate"]
    return None


def _ordering_flags(rows: List[dict]) -> Dict[str, Optional[bool]]:
    """Ablation orderings, evaluated where the needed rows exist (else None)."""
    ours_09_3 = _find_rate(rows, "ours", alpha=0.9, n=3)
    ours_0_3 = _find_rate(rows, "ours", alpha=0.0, n=3)
    ours_09_1 = _find_rate(rows, "ours", alpha=0.9, n=1)
    elev = _find_rate(rows, "elev")
    flags: Dict[str, Optional[bool]] = {
        "cvar_tail_ge_mean": None,
        "n3_ge_n1": None,
        "ours_ge_elev_plus_10pts": None,
    }
    if ours_09_3 is not None and ours_0_3 is not None:
        flags["cvar_tail_ge_mean"] = ours_09_3 >= ours_0_3
    if ours_09_3 is not None and ours_09_1 is not None:
        flags["n3_ge_n1"] = ours_09_3 >= ours_09_1
    if ours_09_3 is not None and elev is not None:
        flags["ours_ge_elev_plus_10pts"] = ours_09_3 >= elev + 0.10
    return flags


# ---------------------------------------------------------------------------
# report emission


def write_report_csv(report: ExperimentReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["algorithm", "alpha", "n", "successes", "damages", "success_rate"])
        for r in report.rows:
            writer.writerow(
                [
                    r["algorithm"],
                    "" if r["alpha"] is None else repr(r["alpha"]),
                    "" if r["n"] is None else r["n"],
                    r["successes"],
                    r["damages"],
                    repr(r["success_rate"]),
                ]
            )


def write_report_json(report: ExperimentReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(
            {
                "config": report.config,
                "rows": report.rows,
                "orderings": report.orderings,
                "trials": report.trial_detail,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
