"""Formula fidelity checks against independent hand evaluations.

Expected values below are computed inline from the documented constants,
never through the module under test.
"""

import math

import numpy as np
import pytest

from blendflow import (DEFAULT_GAS_CONSTANTS, GasConstants, blend_calorific,
                       blend_gravity, blend_kappa, carbon_offset,
                       compressor_power, sound_speed_sq, weymouth_residual)
from blendflow.network import Pipe

GC = DEFAULT_GAS_CONSTANTS


class TestSoundSpeed:
    def test_pure_ng(self):
        assert sound_speed_sq(0.0) == pytest.approx(370.0**2, rel=1e-14)
        assert sound_speed_sq(0.0) == pytest.approx(136900.0, rel=1e-14)

    def test_pure_h2(self):
        assert sound_speed_sq(1.0) == pytest.approx(1090.0**2, rel=1e-14)
        assert sound_speed_sq(1.0) == pytest.approx(1188100.0, rel=1e-14)

    def test_ten_percent_blend(self):
        expected = 0.1 * 1090.0**2 + 0.9 * 370.0**2
        assert expected == 242020.0
        assert sound_speed_sq(0.1) == pytest.approx(242020.0, rel=1e-14)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            sound_speed_sq(-0.01)
        with pytest.raises(ValueError):
            sound_speed_sq(1.01)


class TestBlendRatios:
    def test_endpoints(self):
        assert blend_kappa(0.0) == pytest.approx(1.304, rel=1e-14)
        assert blend_kappa(1.0) == pytest.approx(1.405, rel=1e-14)
        assert blend_gravity(0.0) == pytest.approx(0.5537, rel=1e-14)
        assert blend_gravity(1.0) == pytest.approx(0.0696, rel=1e-14)

    def test_midpoint(self):
        assert blend_kappa(0.5) == pytest.approx(1.3545, rel=1e-12)
        assert blend_gravity(0.5) == pytest.approx(0.31165, rel=1e-12)

    def test_calorific(self):
        assert blend_calorific(0.0) == pytest.approx(44.2, rel=1e-14)
        assert blend_calorific(1.0) == pytest.approx(141.8, rel=1e-14)
        assert blend_calorific(0.1) == pytest.approx(53.96, rel=1e-12)


def test_affine_in_gamma():
    # every blend property must interpolate its endpoints exactly
    for f in (sound_speed_sq, blend_kappa, blend_gravity, blend_calorific):
        lo, hi = f(0.0), f(1.0)
        for gamma in np.linspace(0.0, 1.0, 21):
            assert f(float(gamma)) == pytest.approx(
                gamma * hi + (1.0 - gamma) * lo, rel=1e-13, abs=1e-13)


def _pipe(length=50e3, diameter=0.6, friction=0.01):
    return Pipe(id="P", from_junction="A", to_junction="B", length=length,
                diameter=diameter, area=math.pi * diameter**2 / 4.0,
                friction=friction)


class TestWeymouth:
    def test_no_flow_no_drop(self):
        assert weymouth_residual(5e6, 5e6, 0.0, 0.0, _pipe()) == 0.0

    def test_flow_needs_pressure_drop(self):
        assert weymouth_residual(5e6, 5e6, 10.0, 0.0, _pipe()) < 0.0

    def test_hand_evaluation(self):
        # direct evaluation of the pressure drop relation with a calculator
        pipe = _pipe(length=50000.0, diameter=0.6, friction=0.01)
        area = math.pi * 0.6**2 / 4.0
        coeff = 0.01 * 50000.0 / (0.6 * area**2)
        p_from = 5e6
        phi = 100.0
        p_to = math.sqrt(p_from**2 - coeff * 136900.0 * phi**2)
        assert weymouth_residual(p_from, p_to, phi, 0.0, pipe) == pytest.approx(
            0.0, abs=1e-10 * p_from**2)

    def test_odd_in_flow(self):
        pipe = _pipe()
        for phi in (0.5, 3.0, 42.0):
            fwd = weymouth_residual(4e6, 4e6, phi, 0.2, pipe)
            rev = weymouth_residual(4e6, 4e6, -phi, 0.2, pipe)
            assert fwd == pytest.approx(-rev, rel=1e-14)


class TestCompressorPower:
    def test_unit_ratio_no_work(self):
        for phi, gamma in ((0.0, 0.0), (10.0, 0.05), (100.0, 0.1)):
            assert compressor_power(1.0, phi, gamma) == 0.0

    def test_no_flow_no_work(self):
        for alpha in (1.0, 1.2, 1.4):
            assert compressor_power(alpha, 0.0, 0.0) == 0.0

    def test_spreadsheet_evaluation(self):
        # independent arithmetic of the power formula at alpha=1.4, phi=100, NG
        kappa, grav, temp = 1.304, 0.5537, 288.7
        m = (kappa - 1.0) / kappa
        expected = (286.76 * (kappa - 1.0) * temp / (grav * kappa)) \
            * (1.4**m - 1.0) * 100.0
        assert compressor_power(1.4, 100.0, 0.0) == pytest.approx(expected, rel=1e-10)

    def test_monotone_in_alpha_and_flow(self):
        alphas = np.linspace(1.01, 1.8, 15)
        powers = [compressor_power(float(a), 50.0, 0.05) for a in alphas]
        assert all(b > a for a, b in zip(powers, powers[1:]))
        flows = np.linspace(0.0, 80.0, 15)
        powers = [compressor_power(1.3, float(f), 0.05) for f in flows]
        assert all(b > a for a, b in zip(powers, powers[1:]))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            compressor_power(0.99, 1.0, 0.0)
        with pytest.raises(ValueError):
            compressor_power(1.2, -1.0, 0.0)


class TestCarbonOffset:
    def test_no_hydrogen_no_offset(self):
        assert carbon_offset(5.0, 0.0) == 0.0

    def test_hand_value(self):
        expected = 1.0 * 0.1 * (141.8 / 44.2) * (44.0 / 18.0)
        assert expected == pytest.approx(0.7842, abs=5e-5)
        assert carbon_offset(1.0, 0.1) == pytest.approx(expected, rel=1e-12)

    def test_bilinear(self):
        unit = carbon_offset(1.0, 1.0)
        for d in (0.5, 2.0, 7.0):
            for gamma in (0.05, 0.3, 1.0):
                assert carbon_offset(d, gamma) == pytest.approx(
                    d * gamma * unit, rel=1e-12)
        assert carbon_offset(2.0, 0.3) == pytest.approx(
            2.0 * carbon_offset(1.0, 0.3), rel=1e-12)


def test_custom_constants_flow_through():
    gc = GasConstants(a_ng=400.0, a_h2=1200.0)
    assert sound_speed_sq(0.0, gc) == 160000.0
    assert sound_speed_sq(1.0, gc) == 1440000.0


def test_constants_validation():
    with pytest.raises(ValueError):
        GasConstants(a_ng=-1.0)
    with pytest.raises(ValueError):
        GasConstants(a_ng=1100.0)  # would not be below the hydrogen speed
