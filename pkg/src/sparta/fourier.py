"""Angle arithmetic on the 1-sphere and per-bin Fourier risk functions.

A risk function holds one truncated Fourier series per risk bin.  Evaluating
it at an approach angle yields the concentration parameters of a categorical
risk distribution; the series coefficients also give a closed-form bound on
how fast each concentration can change with the angle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .errors import DimensionError, FormatError, InvalidAngle

TWO_PI = 2.0 * math.pi

DEFAULT_POSITIVITY_FLOOR = 1e-6


def _wrap(x: float) -> float:
    """Reduce a finite real to [0, 2*pi)."""
    if not math.isfinite(x):
        raise InvalidAngle(f"angle must be finite, got {x!r}")
    r = x % TWO_PI
    if r >= TWO_PI:  # tiny negative inputs can round up to exactly 2*pi
        r = 0.0
    return r


@dataclass(frozen=True)
class AngleOfApproach:
    """Heading on S1, stored canonically in [0, 2*pi)."""

    radians: float

    def __post_init__(self):
        object.__setattr__(self, "radians", _wrap(float(self.radians)))

    def __float__(self) -> float:
        return self.radians


AngleLike = Union[AngleOfApproach, float, int]


def as_radians(phi: AngleLike) -> float:
    """Canonical radians in [0, 2*pi) from an angle object or bare real."""
    if isinstance(phi, AngleOfApproach):
        return phi.radians
    return _wrap(float(phi))


def wrap_angle(x: float) -> AngleOfApproach:
    """Wrap any finite real onto the canonical angle range."""
    return AngleOfApproach(float(x))


def fourier_basis(phi: AngleLike, n: int) -> np.ndarray:
    """Basis vector [1, cos(phi), sin(phi), ..., cos(n*phi), sin(n*phi)].

    Length is 2n + 1; this ordering is the contract used by coefficient
    vectors everywhere in the package.
    """
    if n < 1:
        raise ValueError(f"max frequency must be >= 1, got {n}")
    r = as_radians(phi)
    out = np.empty(2 * n + 1)
    out[0] = 1.0
    for k in range(1, n + 1):
        out[2 * k - 1] = math.cos(k * r)
        out[2 * k] = math.sin(k * r)
    return out


def fourier_basis_many(phis: np.ndarray, n: int) -> np.ndarray:
    """Vectorized basis: rows of [1, cos, sin, ...] for an array of angles."""
    if n < 1:
        raise ValueError(f"max frequency must be >= 1, got {n}")
    phis = np.asarray(phis, dtype=float)
    cols = [np.ones_like(phis)]
    for k in range(1, n + 1):
        cols.append(np.cos(k * phis))
        cols.append(np.sin(k * phis))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class FourierCoefficients:
    """One bin's truncated series: a0 plus n cosine and n sine amplitudes."""

    constant: float
    cosine: tuple
    sine: tuple

    def __post_init__(self):
        cosine = tuple(float(a) for a in self.cosine)
        sine = tuple(float(b) for b in self.sine)
        if len(cosine) != len(sine):
            raise DimensionError(
                f"cosine/sine length mismatch: {len(cosine)} vs {len(sine)}"
            )
        if not len(cosine):
            raise DimensionError("need at least one harmonic (max_frequency >= 1)")
        values = (float(self.constant),) + cosine + sine
        if not all(math.isfinite(v) for v in values):
            raise ValueError("all coefficients must be finite")
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "cosine", cosine)
        object.__setattr__(self, "sine", sine)

    @property
    def max_frequency(self) -> int:
        return len(self.cosine)

    def as_vector(self) -> np.ndarray:
        """Coefficients in basis order [constant, a1, b1, ..., an, bn]."""
        out = np.empty(2 * self.max_frequency + 1)
        out[0] = self.constant
        out[1::2] = self.cosine
        out[2::2] = self.sine
        return out

    @classmethod
    def from_vector(cls, vec: Sequence) -> "FourierCoefficients":
        vec = np.asarray(vec, dtype=float)
        if vec.ndim != 1 or vec.size < 3 or vec.size % 2 == 0:
            raise DimensionError(f"coefficient vector must have odd length >= 3, got shape {vec.shape}")
        return cls(constant=float(vec[0]), cosine=tuple(vec[1::2]), sine=tuple(vec[2::2]))

    @classmethod
    def zeros(cls, n: int) -> "FourierCoefficients":
        return cls(constant=0.0, cosine=(0.0,) * n, sine=(0.0,) * n)


def eval_raw(coeffs: FourierCoefficients, phi: AngleLike) -> float:
    """Evaluate the raw (pre-activation) series at one angle."""
    r = as_radians(phi)
    total = coeffs.constant
    for k, (a, b) in enumerate(zip(coeffs.cosine, coeffs.sine), start=1):
        total += a * math.cos(k * r) + b * math.sin(k * r)
    return total


def eval_raw_many(coeffs: FourierCoefficients, phis: np.ndarray) -> np.ndarray:
    """Raw series values for an array of angles."""
    basis = fourier_basis_many(np.asarray(phis, dtype=float), coeffs.max_frequency)
    return basis @ coeffs.as_vector()


def softplus(x):
    """log(1 + e^x) evaluated without overflow for large |x|."""
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class FourierRiskFunction:
    """Per-bin Fourier series mapping any approach angle to concentrations.

    This is the cacheable artifact: computed once per terrain patch, queried
    for any (angle, tail level) afterwards without re-running a model.
    """

    bins: tuple
    positivity_floor: float = DEFAULT_POSITIVITY_FLOOR

    def __post_init__(self):
        bins = tuple(self.bins)
        if not bins:
            raise DimensionError("need at least one bin")
        n = bins[0].max_frequency
        if any(b.max_frequency != n for b in bins):
            raise DimensionError("all bins must share max_frequency")
        if not (self.positivity_floor > 0.0 and math.isfinite(self.positivity_floor)):
            raise ValueError(f"positivity floor must be > 0, got {self.positivity_floor}")
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "positivity_floor", float(self.positivity_floor))

    @property
    def num_bins(self) -> int:
        return len(self.bins)

    @property
    def max_frequency(self) -> int:
        return self.bins[0].max_frequency

    @cached_property
    def _matrix(self) -> np.ndarray:
        """(num_bins, 2n+1) coefficient matrix in basis order."""
        return np.stack([b.as_vector() for b in self.bins])

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, positivity_floor: float = DEFAULT_POSITIVITY_FLOOR) -> "FourierRiskFunction":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise DimensionError(f"expected (bins, coeffs) matrix, got shape {matrix.shape}")
        return cls(
            bins=tuple(FourierCoefficients.from_vector(row) for row in matrix),
            positivity_floor=positivity_floor,
        )


@dataclass(frozen=True)
class ConcentrationVector:
    """Positive per-bin weights of the categorical risk distribution."""

    gamma: tuple

    def __post_init__(self):
        gamma = tuple(float(g) for g in self.gamma)
        if not gamma:
            raise DimensionError("empty concentration vector")
        if not all(math.isfinite(g) and g > 0.0 for g in gamma):
            raise ValueError("concentrations must be finite and > 0")
        object.__setattr__(self, "gamma", gamma)

    def __len__(self) -> int:
        return len(self.gamma)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.gamma)


def raw_values(f: FourierRiskFunction, phi: AngleLike) -> np.ndarray:
    """Pre-activation series values for every bin at one angle."""
    basis = fourier_basis(phi, f.max_frequency)
    return f._matrix @ basis


def eval_concentrations(f: FourierRiskFunction, phi: AngleLike) -> ConcentrationVector:
    """Concentrations at an angle: softplus of each bin's series plus the floor."""
    gamma = softplus(raw_values(f, phi)) + f.positivity_floor
    return ConcentrationVector(gamma=tuple(gamma))


def eval_concentrations_array(f: FourierRiskFunction, phi: AngleLike) -> np.ndarray:
    """Same as :func:`eval_concentrations` but returning a bare array."""
    return softplus(raw_values(f, phi)) + f.positivity_floor


@dataclass(frozen=True)
class LipschitzBound:
    """Per-bin upper bounds on |d gamma / d phi|."""

    per_bin: tuple

    def __post_init__(self):
        object.__setattr__(self, "per_bin", tuple(float(v) for v in self.per_bin))


def lipschitz_bound(f: FourierRiskFunction) -> LipschitzBound:
    """Closed-form per-bin bound (1/4) * sum_k k * sqrt(a_k^2 + b_k^2).

    Computed on the raw series.  The softplus applied afterwards has
    derivative <= 1 everywhere, so the same constant bounds the
    post-activation concentrations as well.
    """
    out = []
    for b in f.bins:
        total = 0.0
        for k, (a, s) in enumerate(zip(b.cosine, b.sine), start=1):
            total += k * math.hypot(a, s)
        out.append(0.25 * total)
    return LipschitzBound(per_bin=tuple(out))


def derivative_sup(coeffs: FourierCoefficients) -> float:
    """Analytic sup of |d/dphi| of the raw series: sum_k k * sqrt(a_k^2 + b_k^2)."""
    return sum(
        k * math.hypot(a, b)
        for k, (a, b) in enumerate(zip(coeffs.cosine, coeffs.sine), start=1)
    )


def empirical_max_slope(
    f: FourierRiskFunction, bin_index: int, samples: int, seed: int, delta: float = 1e-4
) -> float:
    """Max probed slope |raw(phi + delta) - raw(phi)| / delta over seeded angles."""
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    rng = np.random.default_rng(seed)
    phis = rng.uniform(0.0, TWO_PI, size=samples)
    coeffs = f.bins[bin_index]
    lo = eval_raw_many(coeffs, phis)
    hi = eval_raw_many(coeffs, phis + delta)
    return float(np.max(np.abs(hi - lo)) / delta)


# ---------------------------------------------------------------------------
# serialization


def risk_function_to_dict(f: FourierRiskFunction) -> dict:
    return {
        "version": 1,
        "num_bins": f.num_bins,
        "max_frequency": f.max_frequency,
        "positivity_floor": f.positivity_floor,
        "bins": [
            {"constant": b.constant, "cosine": list(b.cosine), "sine": list(b.sine)}
            for b in f.bins
        ],
    }


def risk_function_from_dict(data: dict) -> FourierRiskFunction:
    try:
        version = data["version"]
        if version != 1:
            raise FormatError(f"unsupported risk-function version {version!r}")
        bins = tuple(
            FourierCoefficients(
                constant=b["constant"], cosine=tuple(b["cosine"]), sine=tuple(b["sine"])
            )
            for b in data["bins"]
        )
        f = FourierRiskFunction(bins=bins, positivity_floor=data["positivity_floor"])
        if f.num_bins != data["num_bins"] or f.max_frequency != data["max_frequency"]:
            raise FormatError("risk-function header disagrees with bin payload")
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed risk-function payload: {exc}") from exc
    return f


def save_risk_function(f: FourierRiskFunction, path) -> None:
    with open(path, "w") as fh:
        json.dump(risk_function_to_dict(f), fh)


def load_risk_function(path) -> FourierRiskFunction:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not a risk-function file: {exc}") from exc
    return risk_function_from_dict(data)
