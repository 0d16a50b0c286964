"""Synthetic terrain, point-cloud sampling, and the geometric traversal oracle.

The oracle labels a (patch, angle) pair with a risk sample in [0, 1]: it
traces the two front-wheel paths straight through the patch center at the
given heading and scores the worst single-step height increase against the
wheel radius, then adds a seeded noise term proportional to that core value.
Cheap, deterministic, and angle-dependent, it stands in for a physics
simulator as the label source for all experiments here.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, FormatError, GenerationError
from .fourier import AngleLike, as_radians
from .riskdist import BinGeometry, RiskDistribution

TERRAIN_MAGIC = b"SPTR"
NOISE_SCALE = 0.1
NOISE_FLOOR = 0.05


@dataclass
class Terrain:
    """Heightmap over a regular grid: heights[row, col] at (x0 + col*res, y0 + row*res)."""

    heights: np.ndarray
    resolution: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=float)
        if self.heights.ndim != 2 or min(self.heights.shape) < 2:
            raise GenerationError(f"terrain grid must be 2-D with >= 2 nodes per axis, got {self.heights.shape}")
        if not np.all(np.isfinite(self.heights)):
            raise ValueError("terrain heights must be finite")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be > 0, got {self.resolution}")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @property
    def rows(self) -> int:
        return self.heights.shape[0]

    @property
    def cols(self) -> int:
        return self.heights.shape[1]

    def x_max(self) -> float:
        return self.origin[0] + (self.cols - 1) * self.resolution

    def y_max(self) -> float:
        return self.origin[1] + (self.rows - 1) * self.resolution


def _bilinear(grid: np.ndarray, u, v):
    """Interpolate grid at fractional indices (u=row, v=col), clamped at edges."""
    rows, cols = grid.shape
    u = np.clip(np.asarray(u, dtype=float), 0.0, rows - 1.0)
    v = np.clip(np.asarray(v, dtype=float), 0.0, cols - 1.0)
    u0 = np.minimum(np.floor(u).astype(int), rows - 2)
    v0 = np.minimum(np.floor(v).astype(int), cols - 2)
    du = u - u0
    dv = v - v0
    top = grid[u0, v0] * (1 - dv) + grid[u0, v0 + 1] * dv
    bot = grid[u0 + 1, v0] * (1 - dv) + grid[u0 + 1, v0 + 1] * dv
    return top * (1 - du) + bot * du


def height_at(t: Terrain, x, y):
    """Bilinear terrain height at world coordinates."""
    v = (np.asarray(x, dtype=float) - t.origin[0]) / t.resolution
    u = (np.asarray(y, dtype=float) - t.origin[1]) / t.resolution
    return _bilinear(t.heights, u, v)


@dataclass
class TerrainPatch:
    """Square window resampled from a terrain at its own cell centers."""

    heights: np.ndarray
    resolution: float
    center: tuple

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=float)
        g = self.heights.shape[0]
        if self.heights.ndim != 2 or self.heights.shape[1] != g or g < 2:
            raise GenerationError(f"patch grid must be square with >= 2 cells, got {self.heights.shape}")
        self.center = (float(self.center[0]), float(self.center[1]))

    @property
    def grid_dim(self) -> int:
        return self.heights.shape[0]

    @property
    def side_length(self) -> float:
        return self.grid_dim * self.resolution

    def local_height(self, x, y):
        """Bilinear height at patch-local coordinates (origin at patch center)."""
        half = self.side_length / 2.0
        v = (np.asarray(x, dtype=float) + half) / self.resolution - 0.5
        u = (np.asarray(y, dtype=float) + half) / self.resolution - 0.5
        return _bilinear(self.heights, u, v)

    def max_height(self) -> float:
        return float(self.heights.max())


@dataclass
class PointCloud:
    """Sampled (x, y, z) points in meters."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("point coordinates must be finite")

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class VehicleSpec:
    """Geometry of the vehicle used by the oracle and the planner baselines."""

    wheel_radius: float = 0.3
    track_width: float = 0.6
    wheelbase: float = 0.8
    step_length: float = 0.15

    def __post_init__(self):
        for name in ("wheel_radius", "track_width", "wheelbase", "step_length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.step_length > self.wheel_radius:
            raise ValueError("step_length must not exceed wheel_radius")

    @property
    def footprint_diagonal(self) -> float:
        return math.hypot(self.track_width, self.wheelbase)


# ---------------------------------------------------------------------------
# generators


def gen_obstacle_row(
    width_cells: int,
    depth_cells: int,
    num_obstacles: int,
    obstacle_height_range: tuple,
    resolution: float,
    seed: int,
    kinds: tuple = ("box", "ramp"),
    obstacle_width_m: float = 0.7,
    box_depth_m: float = 0.5,
    ramp_depth_m: float = 0.8,
    gap_m: float = 0.15,
) -> Terrain:
    """Flat ground plus a band of packed, randomly placed box/ramp obstacles.

    Boxes are sharp-edged steps; ramps rise gently toward +y and end in a
    cliff on the far face, so the risk of crossing one depends strongly on
    the heading.  Obstacles share the height range, which keeps an
    elevation-only heuristic from telling them apart.
    """
    if width_cells < 2 or depth_cells < 2:
        raise GenerationError("terrain must be at least 2x2 cells")
    heights = np.zeros((depth_cells, width_cells))
    rng = np.random.default_rng(seed)
    if num_obstacles > 0:
        ow = max(2, int(round(obstacle_width_m / resolution)))
        gap = max(1, int(round(gap_m / resolution)))
        slot = ow + gap
        if num_obstacles * slot > width_cells:
            raise GenerationError(
                f"{num_obstacles} obstacles of {slot} cells do not fit in {width_cells} cells"
            )
        lo, hi = obstacle_height_range
        start = int(rng.integers(0, width_cells - num_obstacles * slot + 1))
        band_center = depth_cells // 2
        for k in range(num_obstacles):
            x0 = start + k * slot
            kind = kinds[int(rng.integers(0, len(kinds)))]
            h = float(rng.uniform(lo, hi))
            if kind == "box":
                d = max(2, int(round(box_depth_m / resolution)))
                y0 = band_center - d // 2
                heights[y0 : y0 + d, x0 : x0 + ow] = h
            elif kind == "ramp":
                d = max(2, int(round(ramp_depth_m / resolution)))
                y0 = band_center - d // 2
                ramp = h * (np.arange(1, d + 1) / d)
                heights[y0 : y0 + d, x0 : x0 + ow] = ramp[:, None]
            else:
                raise GenerationError(f"unknown obstacle kind {kind!r}")
    return Terrain(heights=heights, resolution=resolution)


def gen_boulder_field(
    length_m: float = 40.0,
    width_m: float = 8.0,
    density: float = 0.5,
    resolution: float = 0.1,
    seed: int = 0,
    bump_height_range: tuple = (0.1, 0.5),
    bump_radius_range: tuple = (0.3, 0.7),
) -> Terrain:
    """Seeded field of superposed raised-cosine bumps; length runs along +y."""
    if length_m <= 0 or width_m <= 0:
        raise GenerationError("field dimensions must be positive")
    rows = int(round(length_m / resolution))
    cols = int(round(width_m / resolution))
    heights = np.zeros((rows, cols))
    rng = np.random.default_rng(seed)
    count = int(round(density * length_m * width_m))
    xs = np.arange(cols) * resolution
    ys = np.arange(rows) * resolution
    gx, gy = np.meshgrid(xs, ys)
    for _ in range(count):
        cx = rng.uniform(0.0, width_m)
        cy = rng.uniform(0.0, length_m)
        radius = rng.uniform(*bump_radius_range)
        h = rng.uniform(*bump_height_range)
        d = np.hypot(gx - cx, gy - cy)
        mask = d <= radius
        heights[mask] += 0.5 * h * (1.0 + np.cos(math.pi * d[mask] / radius))
    return Terrain(heights=heights, resolution=resolution)


def gen_patch_scene(
    seed: int,
    size_m: float = 2.4,
    resolution: float = 0.1,
    num_obstacles: tuple = (1, 2),
    height_range: tuple = (0.2, 0.5),
    kinds: tuple = ("wall", "ramp"),
) -> Terrain:
    """Small scene of obstacles near the center; risk varies strongly with heading.

    Obstacle kinds: rotated "wall" strips (sharp edges), rotated "ramp"
    wedges (gentle up one way, cliff the other), and smooth raised-cosine
    "bump" mounds.  World origin sits at the scene center.
    """
    rng = np.random.default_rng(seed)
    nodes = int(round(size_m / resolution)) + 1
    heights = np.zeros((nodes, nodes))
    xs = -size_m / 2.0 + np.arange(nodes) * resolution
    gx, gy = np.meshgrid(xs, xs)
    count = int(rng.integers(num_obstacles[0], num_obstacles[1] + 1))
    for _ in range(count):
        kind = kinds[int(rng.integers(0, len(kinds)))]
        h = float(rng.uniform(*height_range))
        if kind == "bump":
            cx, cy = rng.uniform(-0.45, 0.45, size=2)
            radius = float(rng.uniform(0.35, 0.7))
            d = np.hypot(gx - cx, gy - cy)
            mask = d <= radius
            heights[mask] += 0.5 * h * (1.0 + np.cos(math.pi * d[mask] / radius))
            continue
        theta = rng.uniform(0.0, math.pi)
        cx, cy = rng.uniform(-0.3, 0.3, size=2)
        u = (gx - cx) * math.cos(theta) + (gy - cy) * math.sin(theta)
        w = -(gx - cx) * math.sin(theta) + (gy - cy) * math.cos(theta)
        if kind == "wall":
            length = rng.uniform(0.6, 1.4)
            width = rng.uniform(0.2, 0.5)
            mask = (np.abs(u) <= length / 2.0) & (np.abs(w) <= width / 2.0)
            heights[mask] = np.maximum(heights[mask], h)
        elif kind == "ramp":
            length = rng.uniform(0.6, 1.4)
            depth = rng.uniform(0.5, 0.9)
            mask = (np.abs(u) <= length / 2.0) & (w >= 0.0) & (w <= depth)
            ramp = h * (w / depth)
            heights[mask] = np.maximum(heights[mask], ramp[mask])
        else:
            raise GenerationError(f"unknown scene obstacle kind {kind!r}")
    return Terrain(heights=heights, resolution=resolution, origin=(-size_m / 2.0, -size_m / 2.0))


def extract_patch(t: Terrain, center: tuple, side_length: float) -> TerrainPatch:
    """Bilinear resample of the terrain over a square window at its cell centers."""
    grid_dim = int(round(side_length / t.resolution))
    if grid_dim < 2:
        raise BoundsError(f"side_length {side_length} spans fewer than 2 cells")
    cx, cy = float(center[0]), float(center[1])
    half = grid_dim * t.resolution / 2.0
    eps = 1e-9
    if (
        cx - half < t.origin[0] - eps
        or cy - half < t.origin[1] - eps
        or cx + half > t.x_max() + eps
        or cy + half > t.y_max() + eps
    ):
        raise BoundsError(
            f"patch window [{cx - half}, {cx + half}] x [{cy - half}, {cy + half}] "
            f"exceeds terrain bounds"
        )
    offsets = -half + (np.arange(grid_dim) + 0.5) * t.resolution
    px, py = np.meshgrid(cx + offsets, cy + offsets)
    heights = height_at(t, px, py)
    return TerrainPatch(heights=heights, resolution=t.resolution, center=(cx, cy))


def sample_point_cloud(p: TerrainPatch, points_per_cell: int, seed: int) -> PointCloud:
    """Jittered samples of the patch surface, in patch-local coordinates."""
    if points_per_cell < 1:
        raise ValueError(f"points_per_cell must be >= 1, got {points_per_cell}")
    rng = np.random.default_rng(seed)
    g = p.grid_dim
    half = p.side_length / 2.0
    centers = -half + (np.arange(g) + 0.5) * p.resolution
    cx, cy = np.meshgrid(centers, centers)
    n = g * g * points_per_cell
    jitter = rng.uniform(-p.resolution / 2.0, p.resolution / 2.0, size=(2, points_per_cell, g, g))
    xs = (cx[None, :, :] + jitter[0]).ravel()
    ys = (cy[None, :, :] + jitter[1]).ravel()
    zs = p.local_height(xs, ys)
    return PointCloud(points=np.column_stack([xs, ys, zs]))


# ---------------------------------------------------------------------------
# traversal oracle


def _wheel_path_heights(p: TerrainPatch, phi: AngleLike, v: VehicleSpec):
    """Sampled heights along the left and right front-wheel paths."""
    if p.side_length <= v.footprint_diagonal:
        raise BoundsError(
            f"patch side {p.side_length} must exceed footprint diagonal {v.footprint_diagonal}"
        )
    r = as_radians(phi)
    half = p.side_length / 2.0
    t_max = math.sqrt(half * half - (v.track_width / 2.0) ** 2)
    n_steps = int(math.floor(2.0 * t_max / v.step_length))
    if n_steps < 1:
        raise BoundsError("patch too small for a single wheel step")
    ts = -t_max + np.arange(n_steps + 1) * v.step_length
    dir_x, dir_y = math.cos(r), math.sin(r)
    perp_x, perp_y = -math.sin(r), math.cos(r)
    out = []
    for offset in (v.track_width / 2.0, -v.track_width / 2.0):
        xs = ts * dir_x + offset * perp_x
        ys = ts * dir_y + offset * perp_y
        out.append(p.local_height(xs, ys))
    return out


def traversal_risk_core(p: TerrainPatch, phi: AngleLike, v: VehicleSpec) -> float:
    """Deterministic risk core: worst per-step height increase over wheel radius."""
    worst = 0.0
    for h in _wheel_path_heights(p, phi, v):
        rise = float(np.max(np.diff(h), initial=0.0))
        worst = max(worst, rise)
    return min(max(worst / v.wheel_radius, 0.0), 1.0)


def _noise_half_width(core: float) -> float:
    return NOISE_SCALE * (core + NOISE_FLOOR)


def traversal_risk(p: TerrainPatch, phi: AngleLike, v: VehicleSpec, seed: int) -> float:
    """One seeded risk sample: core plus clipped proportional noise."""
    core = traversal_risk_core(p, phi, v)
    a = _noise_half_width(core)
    noise = float(np.random.default_rng(seed).uniform(-a, a))
    return min(max(core + noise, 0.0), 1.0)


def risk_samples(
    p: TerrainPatch, phi: AngleLike, v: VehicleSpec, draws: int, seed: int
) -> np.ndarray:
    """Vector of `draws` seeded oracle samples at one angle."""
    if draws < 1:
        raise ValueError(f"draws must be >= 1, got {draws}")
    core = traversal_risk_core(p, phi, v)
    a = _noise_half_width(core)
    noise = np.random.default_rng(seed).uniform(-a, a, size=draws)
    return np.clip(core + noise, 0.0, 1.0)


def empirical_distribution(
    p: TerrainPatch,
    phi: AngleLike,
    v: VehicleSpec,
    draws: int,
    geometry: BinGeometry,
    seed: int,
) -> RiskDistribution:
    """Histogram of oracle samples over the bin geometry, normalized."""
    samples = risk_samples(p, phi, v, draws, seed)
    idx = np.floor((samples - geometry.lower) / geometry.width).astype(int)
    idx = np.clip(idx, 0, geometry.num_bins - 1)
    counts = np.bincount(idx, minlength=geometry.num_bins)
    return RiskDistribution(probs=tuple(counts / draws), geometry=geometry)


def footprint_max_height(p: TerrainPatch, phi: AngleLike, v: VehicleSpec) -> float:
    """Max surface height under the vehicle rectangle swept through the patch.

    The sweep covers the full width between the wheel tracks, so an obstacle
    low enough to straddle still counts; this is the conservative
    elevation-only severity the Elev baseline ranks by.
    """
    if p.side_length <= v.footprint_diagonal:
        raise BoundsError(
            f"patch side {p.side_length} must exceed footprint diagonal {v.footprint_diagonal}"
        )
    r = as_radians(phi)
    half = p.side_length / 2.0
    t_max = math.sqrt(half * half - (v.track_width / 2.0) ** 2)
    ds = p.resolution / 2.0
    ts = np.arange(-t_max, t_max + ds / 2.0, ds)
    offs = np.arange(-v.track_width / 2.0, v.track_width / 2.0 + ds / 2.0, ds)
    dir_x, dir_y = math.cos(r), math.sin(r)
    perp_x, perp_y = -math.sin(r), math.cos(r)
    tt, oo = np.meshgrid(ts, offs)
    xs = tt * dir_x + oo * perp_x
    ys = tt * dir_y + oo * perp_y
    return float(np.max(p.local_height(xs, ys)))


# ---------------------------------------------------------------------------
# serialization


def terrain_to_dict(t: Terrain) -> dict:
    return {
        "version": 1,
        "resolution": t.resolution,
        "origin": [t.origin[0], t.origin[1]],
        "rows": t.rows,
        "cols": t.cols,
        "heights": [float(h) for h in t.heights.ravel()],
    }


def terrain_from_dict(data: dict) -> Terrain:
    try:
        if data["version"] != 1:
            raise FormatError(f"unsupported terrain version {data['version']!r}")
        heights = np.asarray(data["heights"], dtype=float).reshape(data["rows"], data["cols"])
        return Terrain(
            heights=heights,
            resolution=data["resolution"],
            origin=tuple(data["origin"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed terrain payload: {exc}") from exc


def save_terrain(t: Terrain, path) -> None:
    with open(path, "w") as fh:
        json.dump(terrain_to_dict(t), fh)


def load_terrain(path) -> Terrain:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not a terrain file: {exc}") from exc
    return terrain_from_dict(data)


def save_terrain_binary(t: Terrain, path) -> None:
    """Flat binary: 24-byte header (magic, u32 version/rows/cols, f64 resolution),
    then row-major little-endian float64 heights.  Origin is not stored."""
    header = struct.pack("<4sIIId", TERRAIN_MAGIC, 1, t.rows, t.cols, t.resolution)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(t.heights.astype("<f8").tobytes(order="C"))


def load_terrain_binary(path) -> Terrain:
    with open(path, "rb") as fh:
        header = fh.read(24)
        if len(header) != 24:
            raise FormatError("terrain binary truncated before header end")
        magic, version, rows, cols, resolution = struct.unpack("<4sIIId", header)
        if magic != TERRAIN_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {TERRAIN_MAGIC!r}")
        if version != 1:
            raise FormatError(f"unsupported terrain binary version {version}")
        payload = fh.read(rows * cols * 8)
        if len(payload) != rows * cols * 8:
            raise FormatError("terrain binary truncated before payload end")
        heights = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy()
    return Terrain(heights=heights, resolution=resolution)
