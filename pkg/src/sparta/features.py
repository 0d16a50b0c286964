"""Point-cloud normalization and the fixed pillar-statistics feature grid.

A learned per-point encoder is deliberately out of scope: each cloud is
scaled into a unit cube and reduced to a 10x10 grid of per-cell statistics
(occupancy, mean z, max z, std z).  That keeps the features -> angle-function
pathway intact while staying cheap enough to train with plain gradient
descent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput
from .terrain import PointCloud

GRID_DIM = 10
NUM_CHANNELS = 4
FEATURE_DIM = GRID_DIM * GRID_DIM * NUM_CHANNELS


def normalize_cloud(q: PointCloud) -> PointCloud:
    """Uniformly scale and translate so the cloud fits x, y in [-0.5, 0.5], z in [0, 0.5].

    One scale factor for all axes (aspect ratios preserved), chosen so the
    tightest axis exactly touches its bounds.  A single point maps to the
    origin.
    """
    if len(q) == 0:
        raise EmptyInput("cannot normalize an empty point cloud")
    pts = q.points
    mins = pts.min(axis=0)
    maxs = pts.max(axis=0)
    extents = maxs - mins
    limits = np.array([1.0, 1.0, 0.5])
    ratios = [limits[i] / extents[i] for i in range(3) if extents[i] > 0.0]
    s = min(ratios) if ratios else 1.0
    mid = (mins + maxs) / 2.0
    out = (pts - mid) * s
    out[:, 2] = (pts[:, 2] - mins[2]) * s
    return PointCloud(points=out)


@dataclass
class FeatureGrid:
    """10x10x4 per-cell statistics over the normalized cloud's x-y plane."""

    cells: np.ndarray

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float)
        if self.cells.shape != (GRID_DIM, GRID_DIM, NUM_CHANNELS):
            raise ValueError(
                f"feature grid must be {GRID_DIM}x{GRID_DIM}x{NUM_CHANNELS}, got {self.cells.shape}"
            )

    def flat(self) -> np.ndarray:
        return self.cells.ravel()


def pillarize(q: PointCloud) -> FeatureGrid:
    """Bucket a normalized cloud into 10x10 x-y pillars of z statistics.

    Channels per cell: [count / (n_points / 100), mean z, max z, std z],
    zeros for empty cells.  Points are sorted into a canonical order before
    accumulation, so the result is exactly invariant to point order.
    """
    if len(q) == 0:
        raise EmptyInput("cannot pillarize an empty point cloud")
    pts = q.points
    ix = np.clip(np.floor((pts[:, 0] + 0.5) * GRID_DIM).astype(int), 0, GRID_DIM - 1)
    iy = np.clip(np.floor((pts[:, 1] + 0.5) * GRID_DIM).astype(int), 0, GRID_DIM - 1)
    cell = iy * GRID_DIM + ix
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], cell))
    cell = cell[order]
    z = pts[order, 2]

    cells = np.zeros((GRID_DIM * GRID_DIM, NUM_CHANNELS))
    counts = np.bincount(cell, minlength=GRID_DIM * GRID_DIM)
    occupied = counts > 0
    starts = np.zeros(GRID_DIM * GRID_DIM, dtype=int)
    starts[1:] = np.cumsum(counts)[:-1]
    sums = np.add.reduceat(z, starts[occupied])
    sq_sums = np.add.reduceat(z * z, starts[occupied])
    maxs = np.maximum.reduceat(z, starts[occupied])
    n = counts[occupied]
    mean = sums / n
    var = np.maximum(sq_sums / n - mean * mean, 0.0)
    cells[occupied, 0] = n / (len(q) / (GRID_DIM * GRID_DIM))
    cells[occupied, 1] = mean
    cells[occupied, 2] = maxs
    cells[occupied, 3] = np.sqrt(var)
    return FeatureGrid(cells=cells.reshape(GRID_DIM, GRID_DIM, NUM_CHANNELS))


def patch_features(patch, points_per_cell: int, seed: int) -> FeatureGrid:
    """Full patch -> features pipeline: sample, normalize, pillarize."""
    from .terrain import sample_point_cloud

    cloud = sample_point_cloud(patch, points_per_cell, seed)
    return pillarize(normalize_cloud(cloud))
