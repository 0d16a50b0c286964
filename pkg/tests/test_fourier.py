import json
import math

import numpy as np
import pytest

from sparta.errors import DimensionError, FormatError, InvalidAngle
from sparta.fourier import (
    TWO_PI,
    AngleOfApproach,
    FourierCoefficients,
    FourierRiskFunction,
    derivative_sup,
    empirical_max_slope,
    eval_concentrations,
    eval_concentrations_array,
    eval_raw,
    fourier_basis,
    lipschitz_bound,
    risk_function_from_dict,
    risk_function_to_dict,
    wrap_angle,
)

from conftest import random_risk_function


def coeffs(constant=0.0, cosine=(0.0, 0.0, 0.0), sine=(0.0, 0.0, 0.0)):
    return FourierCoefficients(constant=constant, cosine=cosine, sine=sine)


class TestWrapAngle:
    def test_identity(self):
        assert wrap_angle(0.0).radians == 0.0

    def test_full_turn(self):
        assert wrap_angle(2 * math.pi).radians == 0.0

    def test_negative(self):
        assert wrap_angle(-math.pi / 2).radians == pytest.approx(3 * math.pi / 2, abs=1e-12)

    def test_congruent(self, rng):
        for x in rng.uniform(-50, 50, 200):
            w = wrap_angle(float(x)).radians
            assert 0.0 <= w < TWO_PI
            assert abs(math.remainder(w - x, TWO_PI)) < 1e-9

    def test_tiny_negative_stays_in_range(self):
        assert 0.0 <= wrap_angle(-1e-20).radians < TWO_PI

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_nonfinite_rejected(self, bad):
        with pytest.raises(InvalidAngle):
            wrap_angle(bad)


class TestBasis:
    def test_zero_angle(self):
        assert np.allclose(fourier_basis(0.0, 3), [1, 1, 0, 1, 0, 1, 0], atol=1e-15)

    def test_quarter_turn(self):
        assert np.allclose(fourier_basis(math.pi / 2, 1), [1, 0, 1], atol=1e-15)

    def test_half_turn(self):
        assert np.allclose(fourier_basis(math.pi, 2), [1, -1, 0, 1, 0], atol=1e-12)

    def test_length(self):
        for n in (1, 3, 5, 7):
            assert len(fourier_basis(1.0, n)) == 2 * n + 1


class TestEvalRaw:
    def test_constant_function(self):
        assert eval_raw(coeffs(constant=2.0), 1.3) == pytest.approx(2.0)

    def test_first_cosine(self):
        assert eval_raw(coeffs(cosine=(1.0, 0.0, 0.0)), math.pi) == pytest.approx(-1.0)

    def test_second_sine(self):
        assert eval_raw(coeffs(sine=(0.0, 1.0, 0.0)), math.pi / 4) == pytest.approx(1.0)

    def test_periodic(self, rng):
        for _ in range(50):
            c = coeffs(
                constant=rng.uniform(-1, 1),
                cosine=tuple(rng.uniform(-1, 1, 3)),
                sine=tuple(rng.uniform(-1, 1, 3)),
            )
            phi = float(rng.uniform(0, TWO_PI))
            assert eval_raw(c, phi) == pytest.approx(
                eval_raw(c, wrap_angle(phi + TWO_PI).radians), abs=1e-9
            )

    def test_linear_in_coefficients(self, rng):
        for _ in range(100):
            a = rng.uniform(-1, 1, 7)
            b = rng.uniform(-1, 1, 7)
            phi = float(rng.uniform(0, TWO_PI))
            c1 = FourierCoefficients(a[0], tuple(a[1::2]), tuple(a[2::2]))
            c2 = FourierCoefficients(b[0], tuple(b[1::2]), tuple(b[2::2]))
            s = a + b
            cs = FourierCoefficients(s[0], tuple(s[1::2]), tuple(s[2::2]))
            assert eval_raw(cs, phi) == pytest.approx(
                eval_raw(c1, phi) + eval_raw(c2, phi), abs=1e-10
            )


class TestConcentrations:
    def test_zero_series_gives_log_two(self):
        f = FourierRiskFunction(bins=tuple(coeffs() for _ in range(8)))
        got = eval_concentrations(f, 0.7)
        assert np.allclose(got.as_array(), math.log(2.0) + 1e-6, atol=1e-12)

    def test_softplus_asymptote(self):
        f = FourierRiskFunction(bins=(coeffs(constant=100.0),))
        assert eval_concentrations_array(f, 2.0)[0] == pytest.approx(100.0 + 1e-6, abs=1e-9)

    def test_periodicity_seeded(self, rng):
        for i in range(1000):
            f = random_risk_function(np.random.default_rng(i), bins=2)
            phi = float(rng.uniform(0, TWO_PI))
            a = eval_concentrations_array(f, phi)
            b = eval_concentrations_array(f, phi + TWO_PI)
            assert np.allclose(a, b, atol=1e-9)

    def test_positivity_seeded(self, rng):
        for i in range(1000):
            f = random_risk_function(np.random.default_rng(i), scale=3.0)
            phi = float(rng.uniform(0, TWO_PI))
            assert np.all(eval_concentrations_array(f, phi) >= f.positivity_floor)


class TestLipschitzBound:
    def test_three_four_five(self):
        f = FourierRiskFunction(bins=(coeffs(cosine=(4.0, 0, 0), sine=(3.0, 0, 0)),))
        assert lipschitz_bound(f).per_bin[0] == pytest.approx(1.25)

    def test_constant_only_is_zero(self):
        f = FourierRiskFunction(bins=(coeffs(constant=5.0),))
        assert lipschitz_bound(f).per_bin[0] == 0.0

    def test_second_harmonic(self):
        f = FourierRiskFunction(bins=(coeffs(cosine=(0, 1.0, 0)),))
        assert lipschitz_bound(f).per_bin[0] == pytest.approx(0.5)

    def test_zero_iff_no_harmonics(self, rng):
        for i in range(50):
            f = random_risk_function(np.random.default_rng(i))
            for b, lb in zip(f.bins, lipschitz_bound(f).per_bin):
                flat = all(v == 0.0 for v in b.cosine + b.sine)
                assert (lb == 0.0) == flat

    def test_absolutely_homogeneous(self, rng):
        for i in range(100):
            f = random_risk_function(np.random.default_rng(i))
            base = np.array(lipschitz_bound(f).per_bin)
            for t in (0.0, 0.5, 2.0, 10.0):
                scaled = FourierRiskFunction(
                    bins=tuple(
                        FourierCoefficients(
                            b.constant,
                            tuple(t * a for a in b.cosine),
                            tuple(t * s for s in b.sine),
                        )
                        for b in f.bins
                    )
                )
                got = np.array(lipschitz_bound(scaled).per_bin)
                assert np.allclose(got, t * base, atol=1e-12)


class TestEmpiricalSlope:
    def test_constant_bin(self):
        f = FourierRiskFunction(bins=(coeffs(constant=3.0),))
        assert empirical_max_slope(f, 0, 100, seed=0) == pytest.approx(0.0, abs=1e-9)

    def test_pure_cosine_slope_near_one(self):
        f = FourierRiskFunction(bins=(coeffs(cosine=(1.0, 0, 0)),))
        slope = empirical_max_slope(f, 0, 10_000, seed=1)
        assert 0.95 <= slope <= 1.0 + 1e-3

    def test_never_exceeds_derivative_sup(self):
        for i in range(100):
            f = random_risk_function(np.random.default_rng(i), bins=2, scale=2.0)
            for b in range(2):
                slope = empirical_max_slope(f, b, 2000, seed=i)
                assert slope <= derivative_sup(f.bins[b]) + 1e-6

    def test_within_four_times_reported_bound(self):
        # the reported bound carries the 1/4 factor; 4x it is the elementary sup
        for i in range(20):
            f = random_risk_function(np.random.default_rng(200 + i), bins=2)
            lb = lipschitz_bound(f)
            for b in range(2):
                slope = empirical_max_slope(f, b, 2000, seed=i)
                assert slope <= 4.0 * lb.per_bin[b] + 1e-6


class TestInvariants:
    def test_bins_share_frequency(self):
        with pytest.raises(DimensionError):
            FourierRiskFunction(bins=(coeffs(), FourierCoefficients(0.0, (1.0,), (0.0,))))

    def test_cosine_sine_length_mismatch(self):
        with pytest.raises(DimensionError):
            FourierCoefficients(0.0, (1.0, 2.0), (0.0,))

    def test_nonfinite_coefficient(self):
        with pytest.raises(ValueError):
            FourierCoefficients(math.nan, (0.0,), (0.0,))

    def test_angle_wraps_on_construction(self):
        assert AngleOfApproach(7.0).radians == pytest.approx(7.0 - TWO_PI)


class TestSerialization:
    def test_round_trip_bit_exact(self, rng):
        for i in range(20):
            f = random_risk_function(np.random.default_rng(i), scale=1.7)
            data = json.loads(json.dumps(risk_function_to_dict(f)))
            g = risk_function_from_dict(data)
            assert g.positivity_floor == f.positivity_floor
            for ba, bb in zip(f.bins, g.bins):
                assert ba.constant == bb.constant
                assert ba.cosine == bb.cosine
                assert ba.sine == bb.sine

    def test_bad_version(self):
        f = random_risk_function(np.random.default_rng(0))
        data = risk_function_to_dict(f)
        data["version"] = 9
        with pytest.raises(FormatError):
            risk_function_from_dict(data)

    def test_missing_field(self):
        with pytest.raises(FormatError):
            risk_function_from_dict({"version": 1})
