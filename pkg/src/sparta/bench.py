"""Inference-efficiency benchmark: cached function queries vs re-inference.

Measures the throughput of answering (patch, angle) risk queries from a warm
coefficient cache against running a full angle-conditioned network forward
pass per query.  Feature grids are precomputed for both sides, so the
comparison isolates query cost: series evaluation + CVaR versus trunk,
embedding, and decoder matmuls.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
import numpy as np

from .cache import CoefficientCache, PatchKey, query_risk
from .fourier import TWO_PI
from .model import SpartaModel, forward
from .planner import SpartaPatchModel, derive_seed
from .riskdist import CvarLevel, cvar, normalize
from .terrain import Terrain, extract_patch


@dataclass
class BenchReport:
    cached_qps: float
    reinfer_qps: float
    ratio: float
    p50_ns: float
    p99_ns: float
    reinfer_p50_ns: float
    reinfer_p99_ns: float
    queries: int
    max_abs_value_gap: float

    def to_dict(self) -> dict:
        return {
            "cached_qps": self.cached_qps,
            "reinfer_qps": self.reinfer_qps,
            "ratio": self.ratio,
            "p50_ns": self.p50_ns,
            "p99_ns": self.p99_ns,
            "reinfer_p50_ns": self.reinfer_p50_ns,
            "reinfer_p99_ns": self.reinfer_p99_ns,
            "queries": self.queries,
            "max_abs_value_gap": self.max_abs_value_gap,
        }


def _percentiles(samples_ns: np.ndarray):
    return float(np.percentile(samples_ns, 50)), float(np.percentile(samples_ns, 99))


def run_bench(
    sparta_model: SpartaModel,
    angle_model: SpartaModel,
    terrain: Terrain,
    num_patches: int = 32,
    queries: int = 100_000,
    patch_side: float = 1.2,
    alpha: float = 0.9,
    seed: int = 0,
) -> BenchReport:
    """Time `queries` seeded (patch, angle) lookups along both paths."""
    rng = np.random.default_rng(seed)
    margin = patch_side / 2.0 + terrain.resolution
    xs = rng.uniform(terrain.origin[0] + margin, terrain.x_max() - margin, size=num_patches)
    ys = rng.uniform(terrain.origin[1] + margin, terrain.y_max() - margin, size=num_patches)
    patches = [extract_patch(terrain, (x, y), patch_side) for x, y in zip(xs, ys)]

    adapter = SpartaPatchModel(sparta_model, seed=seed)
    geometry = sparta_model.geometry
    cache = CoefficientCache()
    keys = []
    for i, p in enumerate(patches):
        key = PatchKey.make("bench", p.center, patch_side, terrain.resolution)
        cache.get_or_compute(key, lambda p=p: adapter.risk_function(p))
        keys.append(key)

    from .features import patch_features

    grids = [
        patch_features(p, adapter.points_per_cell, derive_seed(seed, i))
        for i, p in enumerate(patches)
    ]

    order = rng.integers(0, num_patches, size=queries)
    phis = rng.uniform(0.0, TWO_PI, size=queries)
    level = CvarLevel(alpha)

    # purity check on a subset: cached values equal fresh sparta evaluation
    gap = 0.0
    for i in range(min(num_patches, 16)):
        fresh = adapter.risk_function(patches[i])
        for phi in (0.1, 2.0, 4.5):
            a = query_risk(cache.entries[keys[i]], phi, alpha, geometry)
            b = query_risk(fresh, phi, alpha, geometry)
            gap = max(gap, abs(a - b))

    cached_ns = np.empty(queries)
    t0 = time.perf_counter()
    for j in range(queries):
        s = time.perf_counter_ns()
        fn = cache.entries[keys[order[j]]]
        query_risk(fn, phis[j], alpha, geometry)
        cached_ns[j] = time.perf_counter_ns() - s
    cached_total = time.perf_counter() - t0

    reinfer_ns = np.empty(queries)
    t0 = time.perf_counter()
    for j in range(queries):
        s = time.perf_counter_ns()
        gamma = forward(angle_model, grids[order[j]], phis[j]).as_array()
        cvar(normalize(gamma, angle_model.geometry), level)
        reinfer_ns[j] = time.perf_counter_ns() - s
    reinfer_total = time.perf_counter() - t0

    p50, p99 = _percentiles(cached_ns)
    rp50, rp99 = _percentiles(reinfer_ns)
    cached_qps = queries / cached_total
    reinfer_qps = queries / reinfer_total
    return BenchReport(
        cached_qps=cached_qps,
        reinfer_qps=reinfer_qps,
        ratio=cached_qps / reinfer_qps,
        p50_ns=p50,
        p99_ns=p99,
        reinfer_p50_ns=rp50,
        reinfer_p99_ns=rp99,
        queries=queries,
        max_abs_value_gap=gap,
    )
