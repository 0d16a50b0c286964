"""Categorical risk distributions on a bounded variable: EMD^2, VaR, CVaR.

The risk variable lives on a fixed interval split into B uniform bins whose
centers act as the representative values.  EMD^2 between two distributions is
the squared L2 distance of their CDFs (unit ground metric between adjacent
bins); CVaR uses the discrete Rockafellar-Uryasev form with a fractional
atom at the quantile so that CVaR(alpha=0) equals the mean.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError
from .fourier import ConcentrationVector

ZERO_MASS = 1e-15


@dataclass(frozen=True)
class BinGeometry:
    """Uniform binning of the risk variable over [lower, upper]."""

    num_bins: int
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if self.num_bins < 1:
            raise ValueError(f"need >= 1 bin, got {self.num_bins}")
        if not (self.lower < self.upper):
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")

    @property
    def width(self) -> float:
        return (self.upper - self.lower) / self.num_bins

    def centers(self) -> np.ndarray:
        i = np.arange(self.num_bins)
        return self.lower + (i + 0.5) * self.width

    def center(self, i: int) -> float:
        return self.lower + (i + 0.5) * self.width

    def bin_index(self, value: float) -> int:
        """Bin holding `value`; the top bin is closed on the right."""
        i = int(math.floor((value - self.lower) / self.width))
        return min(max(i, 0), self.num_bins - 1)


DEFAULT_GEOMETRY = BinGeometry(num_bins=8, lower=0.0, upper=1.0)


@dataclass(frozen=True)
class RiskDistribution:
    """Normalized categorical distribution over the bin geometry."""

    probs: tuple
    geometry: BinGeometry

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if len(probs) != self.geometry.num_bins:
            raise DimensionError(
                f"{len(probs)} probs for {self.geometry.num_bins} bins"
            )
        if any(not math.isfinite(p) or p < 0.0 for p in probs):
            raise ValueError("probabilities must be finite and >= 0")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {sum(probs)!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @cached_property
    def _probs(self) -> np.ndarray:
        return np.asarray(self.probs)

    def as_array(self) -> np.ndarray:
        return self._probs


@dataclass(frozen=True)
class CvarLevel:
    """Tail level alpha: 0 averages everything (the mean), ->1 the worst tail."""

    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")


def _check_same_geometry(p: RiskDistribution, q: RiskDistribution) -> None:
    if p.geometry != q.geometry:
        raise DimensionError(f"geometry mismatch: {p.geometry} vs {q.geometry}")


def normalize(gamma, geometry: BinGeometry) -> RiskDistribution:
    """Concentrations to probabilities: p_i = gamma_i / sum(gamma)."""
    if isinstance(gamma, ConcentrationVector):
        arr = gamma.as_array()
    else:
        arr = np.asarray(gamma, dtype=float)
    if arr.shape != (geometry.num_bins,):
        raise DimensionError(
            f"concentration vector of shape {arr.shape} for {geometry.num_bins} bins"
        )
    probs = arr / arr.sum()
    return RiskDistribution(probs=tuple(probs), geometry=geometry)


def emd2_cdf(p: np.ndarray, q: np.ndarray) -> float:
    """Squared CDF distance between two probability vectors (array form)."""
    d = np.cumsum(p) - np.cumsum(q)
    return float(d @ d)


def emd2_grad_cdf(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """d emd2 / d p_k = 2 * sum_{i >= k} (P_i - Q_i) (array form)."""
    d = np.cumsum(p) - np.cumsum(q)
    return 2.0 * np.cumsum(d[::-1])[::-1]


def emd2(p: RiskDistribution, q: RiskDistribution) -> float:
    """Squared earth mover's distance with unit metric between adjacent bins."""
    _check_same_geometry(p, q)
    return emd2_cdf(p.as_array(), q.as_array())


def emd2_grad(p: RiskDistribution, q: RiskDistribution) -> np.ndarray:
    """Gradient of emd2(p, q) with respect to the entries of p."""
    _check_same_geometry(p, q)
    return emd2_grad_cdf(p.as_array(), q.as_array())


def mean(d: RiskDistribution) -> float:
    return float(d.as_array() @ d.geometry.centers())


def value_at_risk(d: RiskDistribution, level: CvarLevel) -> float:
    """Smallest bin center whose cumulative mass reaches alpha.

    At alpha = 0 this is the lowest bin holding nonzero mass (mass below
    1e-15 is treated as empty).
    """
    probs = d.as_array()
    if level.alpha == 0.0:
        idx = int(np.argmax(probs > ZERO_MASS))
        return d.geometry.center(idx)
    cum = np.cumsum(probs)
    idx = int(np.searchsorted(cum, level.alpha, side="left"))
    idx = min(idx, d.geometry.num_bins - 1)
    return d.geometry.center(idx)


def cvar(d: RiskDistribution, level: CvarLevel) -> float:
    """Expected value of the worst (1 - alpha) tail, fractional atom included.

    CVaR = (1 / (1 - alpha)) * [(F(v) - alpha) * v + sum_{center > v} p * c]
    with v the value-at-risk and F its inclusive cumulative mass, so the
    quantile atom contributes exactly the mass needed to average (1 - alpha).
    """
    probs = d.as_array()
    centers = d.geometry.centers()
    v = value_at_risk(d, level)
    iv = d.geometry.bin_index(v)
    f_v = float(np.sum(probs[: iv + 1]))
    tail = float(probs[iv + 1 :] @ centers[iv + 1 :])
    return ((f_v - level.alpha) * v + tail) / (1.0 - level.alpha)


# ---------------------------------------------------------------------------
# serialization


def distribution_to_dict(d: RiskDistribution) -> dict:
    return {
        "version": 1,
        "lower": d.geometry.lower,
        "upper": d.geometry.upper,
        "probs": list(d.probs),
    }


def distribution_from_dict(data: dict) -> RiskDistribution:
    geometry = BinGeometry(
        num_bins=len(data["probs"]), lower=data["lower"], upper=data["upper"]
    )
    return RiskDistribution(probs=tuple(data["probs"]), geometry=geometry)


def save_distribution(d: RiskDistribution, path) -> None:
    with open(path, "w") as fh:
        json.dump(distribution_to_dict(d), fh)


def write_distribution_csv(d: RiskDistribution, path) -> None:
    """Plot-data emission: one `bin_center,prob` row per bin."""
    with open(path, "w") as fh:
        fh.write("bin_center,prob\n")
        for c, p in zip(d.geometry.centers(), d.probs):
            fh.write(f"{float(c)!r},{float(p)!r}\n")
