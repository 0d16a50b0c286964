import numpy as np
import pytest

from sparta.errors import EmptyInput
from sparta.features import GRID_DIM, normalize_cloud, pillarize, patch_features
from sparta.terrain import PointCloud, TerrainPatch


def cloud(points):
    return PointCloud(points=np.asarray(points, dtype=float))


class TestNormalizeCloud:
    def test_already_normalized_unchanged(self, rng):
        pts = rng.uniform(-0.5, 0.5, (200, 3))
        pts[:, 2] = rng.uniform(0.0, 0.5, 200)
        # force the extremes so the cube is exactly filled
        pts[0] = (-0.5, -0.5, 0.0)
        pts[1] = (0.5, 0.5, 0.5)
        out = normalize_cloud(cloud(pts))
        assert np.allclose(out.points, pts, atol=1e-12)

    def test_uniform_scale(self, rng):
        pts = np.column_stack(
            [rng.uniform(0, 10, 500), rng.uniform(0, 10, 500), rng.uniform(0, 5, 500)]
        )
        pts[0] = (0.0, 0.0, 0.0)
        pts[1] = (10.0, 10.0, 5.0)
        out = normalize_cloud(cloud(pts)).points
        assert out[:, 0].min() == pytest.approx(-0.5) and out[:, 0].max() == pytest.approx(0.5)
        assert out[:, 1].min() == pytest.approx(-0.5) and out[:, 1].max() == pytest.approx(0.5)
        assert out[:, 2].min() == pytest.approx(0.0) and out[:, 2].max() == pytest.approx(0.5)
        # uniform factor: relative geometry preserved
        ref = (pts - pts.mean(axis=0)) * 0.1
        got = out - out.mean(axis=0)
        assert np.allclose(got, ref, atol=1e-9)

    def test_single_point_to_origin(self):
        out = normalize_cloud(cloud([[3.0, -2.0, 7.0]]))
        assert np.allclose(out.points, [[0.0, 0.0, 0.0]])

    def test_tall_cloud_binds_z(self, rng):
        pts = np.column_stack(
            [rng.uniform(0, 1, 100), rng.uniform(0, 1, 100), rng.uniform(0, 4, 100)]
        )
        pts[0] = (0, 0, 0)
        pts[1] = (1, 1, 4)
        out = normalize_cloud(cloud(pts)).points
        assert out[:, 2].max() == pytest.approx(0.5)
        assert out[:, 0].max() - out[:, 0].min() == pytest.approx(0.125)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            normalize_cloud(PointCloud(points=np.zeros((0, 3))))


class TestPillarize:
    def test_flat_cloud_stats(self, rng):
        pts = np.column_stack([rng.uniform(-0.5, 0.5, 400), rng.uniform(-0.5, 0.5, 400), np.zeros(400)])
        grid = pillarize(cloud(pts)).cells
        occupied = grid[:, :, 0] > 0
        assert occupied.any()
        assert np.allclose(grid[occupied, 1:], 0.0)

    def test_one_point_per_cell(self):
        pts = []
        for iy in range(GRID_DIM):
            for ix in range(GRID_DIM):
                pts.append(((ix + 0.5) / 10 - 0.5, (iy + 0.5) / 10 - 0.5, 0.05 * ((ix + iy) % 5)))
        grid = pillarize(cloud(pts)).cells
        for iy in range(GRID_DIM):
            for ix in range(GRID_DIM):
                z = 0.05 * ((ix + iy) % 5)
                assert grid[iy, ix, 1] == pytest.approx(z)
                assert grid[iy, ix, 2] == pytest.approx(z)
                assert grid[iy, ix, 3] == 0.0

    def test_permutation_invariance_exact(self, rng):
        pts = np.column_stack(
            [rng.uniform(-0.5, 0.5, 600), rng.uniform(-0.5, 0.5, 600), rng.uniform(0, 0.5, 600)]
        )
        base = pillarize(cloud(pts)).cells
        for seed in range(5):
            perm = np.random.default_rng(seed).permutation(len(pts))
            shuffled = pillarize(cloud(pts[perm])).cells
            assert np.array_equal(shuffled, base)

    def test_mean_le_max(self, rng):
        pts = np.column_stack(
            [rng.uniform(-0.5, 0.5, 500), rng.uniform(-0.5, 0.5, 500), rng.uniform(0, 0.5, 500)]
        )
        grid = pillarize(cloud(pts)).cells
        occ = grid[:, :, 0] > 0
        assert np.all(grid[occ, 1] <= grid[occ, 2] + 1e-12)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            pillarize(PointCloud(points=np.zeros((0, 3))))


def test_patch_features_deterministic():
    patch = TerrainPatch(heights=np.linspace(0, 0.4, 144).reshape(12, 12), resolution=0.1, center=(0, 0))
    a = patch_features(patch, 2, seed=4)
    b = patch_features(patch, 2, seed=4)
    assert np.array_equal(a.cells, b.cells)
    assert a.flat().shape == (400,)
