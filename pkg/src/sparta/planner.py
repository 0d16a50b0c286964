"""Heading-aware lattice planning with tail-risk edge costs.

Every directed move in an 8-connected grid carries its geometric heading;
the risk of an edge is the CVaR of the risk distribution at that heading,
taken from a cached per-patch Fourier function (or re-inferred per angle for
the angle-input baseline).  Edges whose CVaR exceeds the query threshold are
infeasible; among feasible paths the cheapest combination of distance and
risk wins, with deterministic tie-breaking.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .cache import CoefficientCache, PatchKey, query_risk
from .errors import GenerationError, NoPath
from .features import patch_features
from .fourier import FourierRiskFunction, wrap_angle
from .model import SpartaModel, TrainConfig, fit_patch_direct, forward
from .riskdist import BinGeometry, CvarLevel, DEFAULT_GEOMETRY, cvar, normalize
from .terrain import (
    Terrain,
    TerrainPatch,
    VehicleSpec,
    empirical_distribution,
    extract_patch,
    footprint_max_height,
    risk_samples,
)

# 8-connected moves in a fixed order; headings are multiples of pi/4
MOVES: Tuple[Tuple[int, int], ...] = (
    (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1),
)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from hashable parts (no builtin hash: runs must agree)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, bytes):
            h.update(p)
        elif isinstance(p, float):
            h.update(struct.pack("<d", p))
        elif isinstance(p, int):
            h.update(struct.pack("<q", p))
        else:
            h.update(str(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little") >> 1


@dataclass(frozen=True)
class LatticeEdge:
    src: Tuple[int, int]
    dst: Tuple[int, int]
    phi: float
    heading_index: int
    length: float
    patch_center: Tuple[float, float]


@dataclass
class LatticeGraph:
    """Grid cells x H discrete headings over a terrain."""

    terrain_id: str
    nx: int
    ny: int
    cell_size: float
    patch_side: float
    node_origin: Tuple[float, float]
    resolution: float
    headings: int = 8

    def node_xy(self, node: Tuple[int, int]) -> Tuple[float, float]:
        return (
            self.node_origin[0] + node[0] * self.cell_size,
            self.node_origin[1] + node[1] * self.cell_size,
        )

    def in_bounds(self, node: Tuple[int, int]) -> bool:
        return 0 <= node[0] < self.nx and 0 <= node[1] < self.ny

    def edges_from(self, node: Tuple[int, int]) -> List[LatticeEdge]:
        out = []
        x0, y0 = self.node_xy(node)
        for k, (dx, dy) in enumerate(MOVES):
            dst = (node[0] + dx, node[1] + dy)
            if not self.in_bounds(dst):
                continue
            x1, y1 = self.node_xy(dst)
            out.append(
                LatticeEdge(
                    src=node,
                    dst=dst,
                    phi=wrap_angle(math.atan2(dy, dx)).radians,
                    heading_index=k,
                    length=math.hypot(x1 - x0, y1 - y0),
                    patch_center=((x0 + x1) / 2.0, (y0 + y1) / 2.0),
                )
            )
        return out

    def patch_key(self, edge: LatticeEdge) -> PatchKey:
        return PatchKey.make(self.terrain_id, edge.patch_center, self.patch_side, self.resolution)


def build_lattice(
    t: Terrain,
    cell_size: float,
    patch_side: float,
    headings: int = 8,
    terrain_id: str = "terrain",
) -> LatticeGraph:
    """8-connected lattice whose edge-midpoint patches all fit inside the terrain."""
    if cell_size < t.resolution:
        raise GenerationError(f"cell_size {cell_size} below terrain resolution {t.resolution}")
    if headings != len(MOVES):
        raise GenerationError("only 8 headings (8-connectivity) are supported")
    margin = patch_side / 2.0 + cell_size / 2.0
    x_lo = t.origin[0] + margin
    y_lo = t.origin[1] + margin
    nx = int(math.floor((t.x_max() - margin - x_lo) / cell_size)) + 1
    ny = int(math.floor((t.y_max() - margin - y_lo) / cell_size)) + 1
    if nx < 2 or ny < 2:
        raise GenerationError(
            f"terrain {t.x_max() - t.origin[0]:.2f}x{t.y_max() - t.origin[1]:.2f} m too small "
            f"for cell {cell_size} m and patch {patch_side} m"
        )
    return LatticeGraph(
        terrain_id=terrain_id,
        nx=nx,
        ny=ny,
        cell_size=cell_size,
        patch_side=patch_side,
        node_origin=(x_lo, y_lo),
        resolution=t.resolution,
        headings=headings,
    )


@dataclass(frozen=True)
class PlanQuery:
    start: Tuple[int, int]
    goal: Tuple[int, int]
    alpha: CvarLevel = CvarLevel(0.9)
    risk_threshold: float = 1.0
    distance_weight: float = 1.0
    risk_weight: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.risk_threshold <= 1.0):
            raise ValueError(f"risk threshold must be in (0, 1], got {self.risk_threshold}")
        if self.distance_weight < 0 or self.risk_weight < 0:
            raise ValueError("cost weights must be >= 0")
        if self.distance_weight == 0 and self.risk_weight == 0:
            raise ValueError("at least one cost weight must be positive")


@dataclass
class PlanResult:
    path: List[Tuple[int, int, int]]  # (ix, iy, heading_index at arrival)
    edges: List[LatticeEdge]
    total_distance: float
    total_cost: float
    max_edge_cvar: float
    per_edge_cvar: List[float]


@dataclass
class RolloutStats:
    trials: int
    successes: int
    damages: int

    def __post_init__(self):
        if self.successes + self.damages != self.trials:
            raise ValueError("successes + damages must equal trials")

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


# ---------------------------------------------------------------------------
# risk model adapters


class SpartaPatchModel:
    """Cacheable adapter: network forward -> per-patch Fourier risk function."""

    def __init__(self, model: SpartaModel, points_per_cell: int = 2, seed: int = 0):
        if model.head_kind != "sparta":
            raise ValueError("SpartaPatchModel needs a sparta-head checkpoint")
        self.model = model
        self.points_per_cell = points_per_cell
        self.seed = seed
        self.geometry = model.geometry

    def _cloud_seed(self, patch: TerrainPatch) -> int:
        return derive_seed(self.seed, patch.heights.tobytes(), patch.resolution)

    def risk_function(self, patch: TerrainPatch) -> FourierRiskFunction:
        grid = patch_features(patch, self.points_per_cell, self._cloud_seed(patch))
        return forward(self.model, grid)


def _patch_digest(patch: TerrainPatch) -> bytes:
    return hashlib.blake2b(
        patch.heights.tobytes() + struct.pack("<d", patch.resolution), digest_size=16
    ).digest()


class OracleLabeler:
    """Seeded (angle, empirical distribution) labels per patch, memoized by content.

    Label seeds derive from the patch digest, so results are identical no
    matter in which order patches are visited, and models with different max
    frequencies can share one labeler.
    """

    def __init__(
        self,
        vehicle: VehicleSpec,
        geometry: BinGeometry = DEFAULT_GEOMETRY,
        fit_angles: int = 16,
        draws: int = 200,
        seed: int = 0,
    ):
        self.vehicle = vehicle
        self.geometry = geometry
        self.fit_angles = fit_angles
        self.draws = draws
        self.seed = seed
        self._memo: Dict[bytes, list] = {}

    def labels(self, patch: TerrainPatch, digest: Optional[bytes] = None) -> list:
        digest = digest or _patch_digest(patch)
        hit = self._memo.get(digest)
        if hit is not None:
            return hit
        base = derive_seed(self.seed, digest)
        phis = np.arange(self.fit_angles) * (2.0 * math.pi / self.fit_angles)
        samples = [
            (float(phi), empirical_distribution(patch, float(phi), self.vehicle, self.draws,
                                                self.geometry, base + i))
            for i, phi in enumerate(phis)
        ]
        self._memo[digest] = samples
        return samples


class OracleFitModel:
    """Cacheable adapter: label a patch with the traversal oracle, then fit.

    The per-patch fit is the compute-once step of the pipeline when no
    trained network is in play; identical patch contents share one fit via a
    content-addressed memo (labels and fit are deterministic).
    """

    def __init__(
        self,
        vehicle: VehicleSpec,
        max_frequency: int = 3,
        geometry: BinGeometry = DEFAULT_GEOMETRY,
        fit_angles: int = 16,
        draws: int = 200,
        fit_cfg: Optional[TrainConfig] = None,
        seed: int = 0,
        labeler: Optional[OracleLabeler] = None,
    ):
        self.vehicle = vehicle
        self.max_frequency = max_frequency
        self.geometry = geometry
        self.fit_cfg = fit_cfg or TrainConfig(learning_rate=40.0, epochs=400, batch_size=1, seed=0)
        self.seed = seed
        self.labeler = labeler or OracleLabeler(
            vehicle, geometry, fit_angles=fit_angles, draws=draws, seed=seed
        )
        self._memo: Dict[bytes, FourierRiskFunction] = {}

    def risk_function(self, patch: TerrainPatch) -> FourierRiskFunction:
        digest = _patch_digest(patch)
        hit = self._memo.get(digest)
        if hit is not None:
            return hit
        samples = self.labeler.labels(patch, digest)
        fn = fit_patch_direct(samples, n=self.max_frequency, B=self.geometry.num_bins, cfg=self.fit_cfg)
        self._memo[digest] = fn
        return fn


class AngleInputModel:
    """Per-angle adapter: full network forward for every (patch, angle) query."""

    def __init__(self, model: SpartaModel, points_per_cell: int = 2, seed: int = 0):
        if model.head_kind != "angle_input":
            raise ValueError("AngleInputModel needs an angle_input-head checkpoint")
        self.model = model
        self.points_per_cell = points_per_cell
        self.seed = seed
        self.geometry = model.geometry
        self._feature_memo: Dict[bytes, object] = {}

    def _features(self, patch: TerrainPatch):
        digest = patch.heights.tobytes()
        grid = self._feature_memo.get(digest)
        if grid is None:
            grid = patch_features(
                patch, self.points_per_cell, derive_seed(self.seed, digest, patch.resolution)
            )
            self._feature_memo[digest] = grid
        return grid

    def concentrations(self, patch: TerrainPatch, phi: float) -> np.ndarray:
        return forward(self.model, self._features(patch), phi).as_array()


def edge_cvar(
    edge: LatticeEdge,
    graph: LatticeGraph,
    terrain: Terrain,
    cache: Optional[CoefficientCache],
    model,
    alpha: CvarLevel,
) -> float:
    """CVaR at the edge's heading, via the cache when the model is cacheable."""
    patch = extract_patch(terrain, edge.patch_center, graph.patch_side)
    if hasattr(model, "risk_function"):
        if cache is not None:
            fn, _ = cache.get_or_compute(graph.patch_key(edge), lambda: model.risk_function(patch))
        else:
            fn = model.risk_function(patch)
        return query_risk(fn, edge.phi, alpha.alpha, model.geometry)
    gamma = model.concentrations(patch, edge.phi)
    return cvar(normalize(gamma, model.geometry), alpha)


def edge_cost(
    edge: LatticeEdge,
    graph: LatticeGraph,
    terrain: Terrain,
    cache: Optional[CoefficientCache],
    model,
    query: PlanQuery,
) -> Tuple[float, bool]:
    """(cost, feasible): weighted distance + risk, infeasible above the threshold."""
    risk = edge_cvar(edge, graph, terrain, cache, model, query.alpha)
    feasible = risk <= query.risk_threshold
    cost = query.distance_weight * edge.length + query.risk_weight * risk
    return cost, feasible


def _search(graph: LatticeGraph, query: PlanQuery, edge_cost_fn) -> PlanResult:
    """Deterministic uniform-cost search; ties break on fewer edges, then node order."""
    if query.start == query.goal:
        raise ValueError("start and goal must differ")
    for node in (query.start, query.goal):
        if not graph.in_bounds(node):
            raise NoPath(f"node {node} outside lattice {graph.nx}x{graph.ny}")
    start = query.start
    best: Dict[Tuple[int, int], Tuple[float, int]] = {start: (0.0, 0)}
    came: Dict[Tuple[int, int], Tuple[Tuple[int, int], LatticeEdge, float]] = {}
    heap = [(0.0, 0, start)]
    settled = set()
    while heap:
        cost, hops, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        if node == query.goal:
            edges: List[LatticeEdge] = []
            cvars: List[float] = []
            cur = node
            while cur != start:
                prev, edge, risk = came[cur]
                edges.append(edge)
                cvars.append(risk)
                cur = prev
            edges.reverse()
            cvars.reverse()
            path = [(start[0], start[1], edges[0].heading_index)]
            path += [(e.dst[0], e.dst[1], e.heading_index) for e in edges]
            return PlanResult(
                path=path,
                edges=edges,
                total_distance=sum(e.length for e in edges),
                total_cost=cost,
                max_edge_cvar=max(cvars),
                per_edge_cvar=cvars,
            )
        for edge in graph.edges_from(node):
            if edge.dst in settled:
                continue
            step_cost, feasible, risk = edge_cost_fn(edge)
            if not feasible:
                continue
            cand = (cost + step_cost, hops + 1)
            seen = best.get(edge.dst)
            if seen is None or cand < seen:
                best[edge.dst] = cand
                came[edge.dst] = (node, edge, risk)
                heapq.heappush(heap, (cand[0], cand[1], edge.dst))
    raise NoPath(f"no feasible path from {query.start} to {query.goal} at threshold {query.risk_threshold}")


def plan(
    graph: LatticeGraph,
    terrain: Terrain,
    cache: Optional[CoefficientCache],
    model,
    query: PlanQuery,
) -> PlanResult:
    """Optimal feasible path under CVaR-aware edge costs."""

    def cost_fn(edge: LatticeEdge):
        risk = edge_cvar(edge, graph, terrain, cache, model, query.alpha)
        return (
            query.distance_weight * edge.length + query.risk_weight * risk,
            risk <= query.risk_threshold,
            risk,
        )

    return _search(graph, query, cost_fn)


def plan_elev_baseline(
    graph: LatticeGraph,
    terrain: Terrain,
    query: PlanQuery,
    vehicle: VehicleSpec,
) -> PlanResult:
    """Same search with the angle-blind heuristic: normalized max footprint elevation."""

    def cost_fn(edge: LatticeEdge):
        patch = extract_patch(terrain, edge.patch_center, graph.patch_side)
        elev = footprint_max_height(patch, edge.phi, vehicle)
        risk = min(max(elev / vehicle.wheel_radius, 0.0), 1.0)
        return (
            query.distance_weight * edge.length + query.risk_weight * risk,
            risk <= query.risk_threshold,
            risk,
        )

    return _search(graph, query, cost_fn)


def evaluate_rollout(
    terrain: Terrain,
    result: PlanResult,
    graph: LatticeGraph,
    vehicle: VehicleSpec,
    trials: int,
    damage_threshold: float = 0.8,
    seed: int = 0,
) -> RolloutStats:
    """Monte-Carlo traversals of a planned path against the oracle.

    A trial takes one seeded risk sample per edge and counts as damage if any
    sample reaches the damage threshold.  Trial t uses seed + t, so parallel
    evaluation with partitioned seeds aggregates identically.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    patches = [extract_patch(terrain, e.patch_center, graph.patch_side) for e in result.edges]
    damages = 0
    for t in range(trials):
        rng_seed = seed + t
        damaged = False
        for i, (edge, patch) in enumerate(zip(result.edges, patches)):
            sample = risk_samples(patch, edge.phi, vehicle, 1, derive_seed(rng_seed, i))[0]
            if sample >= damage_threshold:
                damaged = True
                break
        damages += int(damaged)
    return RolloutStats(trials=trials, successes=trials - damages, damages=damages)
