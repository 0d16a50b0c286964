"""Shared builders for seeded test inputs."""

import numpy as np
import pytest

from sparta.features import GRID_DIM, NUM_CHANNELS, FeatureGrid
from sparta.fourier import FourierCoefficients, FourierRiskFunction, eval_concentrations_array
from sparta.riskdist import BinGeometry, RiskDistribution

GEO8 = BinGeometry(num_bins=8, lower=0.0, upper=1.0)


def random_coefficients(rng, n=3, scale=1.0):
    return FourierCoefficients(
        constant=float(rng.uniform(-1.0, 2.0) * scale),
        cosine=tuple(float(rng.uniform(-1.0, 1.0) * scale / k) for k in range(1, n + 1)),
        sine=tuple(float(rng.uniform(-1.0, 1.0) * scale / k) for k in range(1, n + 1)),
    )


def random_risk_function(rng, bins=8, n=3, scale=1.0):
    return FourierRiskFunction(
        bins=tuple(random_coefficients(rng, n=n, scale=scale) for _ in range(bins))
    )


def function_probs(f, phi):
    gamma = eval_concentrations_array(f, phi)
    return gamma / gamma.sum()


def sample_distribution(f, phi, draws, rng, geometry=GEO8):
    """Multinomial draws from the categorical a risk function induces at phi."""
    counts = rng.multinomial(draws, function_probs(f, phi))
    return RiskDistribution(probs=tuple(counts / draws), geometry=geometry)


def random_feature_grid(rng):
    cells = np.zeros((GRID_DIM, GRID_DIM, NUM_CHANNELS))
    occ = rng.random((GRID_DIM, GRID_DIM)) > 0.2
    count = int(occ.sum())
    cells[occ, 0] = rng.uniform(0.5, 1.5, count)
    mean_z = rng.uniform(0.0, 0.4, count)
    cells[occ, 1] = mean_z
    cells[occ, 2] = mean_z + rng.uniform(0.0, 0.1, count)
    cells[occ, 3] = rng.uniform(0.0, 0.1, count)
    return FeatureGrid(cells=cells)


def random_target(rng, geometry=GEO8):
    return RiskDistribution(probs=tuple(rng.dirichlet(np.ones(8) * 0.7)), geometry=geometry)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
