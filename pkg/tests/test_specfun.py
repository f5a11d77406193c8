"""Special-function checks against closed forms and high-precision oracles.

Frozen oracle values were computed with mpmath at 40 digits: spherical
harmonics through an arbitrary-precision Legendre recurrence, spherical
Bessel values through the half-integer cylinder functions.
"""

import math

import numpy as np
import pytest

from nfsynth.errors import DomainError
from nfsynth.geometry import sphere_rule
from nfsynth.specfun import (
    DEGREE_CAP,
    HarmonicIndex,
    num_coefficients,
    sph_bessel_j,
    sph_bessel_y,
    sph_hankel1,
    sph_harm,
    sph_harm_derivatives,
    sph_harm_matrix,
)

# mpmath oracle values (40-digit arithmetic, independent recurrences)
Y_5_3_AT_1p1_0p7 = 0.10529562622559045 - 0.18003936248479105j
Y_4_2_AT_0p9_0p3 = 0.28881156720139605 + 0.19758662379732528j
J_25_AT_10 = 1.284342236009569715e-09
J_7_AT_3p5 = 0.0021980206936209947
Y_12_AT_0p8 = -5832910279813.611


class TestHarmonicIndex:
    def test_flat_bijection(self):
        flats = []
        for l in range(9):
            for m in range(-l, l + 1):
                flats.append(HarmonicIndex(l, m).flat)
        assert flats == list(range(num_coefficients(8)))

    def test_from_flat_round_trip(self):
        for i in range(num_coefficients(8)):
            idx = HarmonicIndex.from_flat(i)
            assert idx.flat == i

    def test_invalid_order_rejected(self):
        with pytest.raises(DomainError):
            HarmonicIndex(2, 3)
        with pytest.raises(DomainError):
            HarmonicIndex(-1, 0)

    def test_degree_cap(self):
        with pytest.raises(DomainError):
            HarmonicIndex(DEGREE_CAP + 1, 0)


class TestSphHarm:
    def test_constant_harmonic(self):
        for theta, phi in ((0.1, 0.2), (2.0, 4.0), (np.pi / 2, 0.0)):
            assert sph_harm(HarmonicIndex(0, 0), theta, phi) == pytest.approx(
                0.2820947918, abs=1e-10
            )

    def test_axis_value_l1(self):
        val = sph_harm(HarmonicIndex(1, 0), 0.0, 0.0)
        assert val.real == pytest.approx(math.sqrt(3 / (4 * math.pi)), abs=1e-12)
        assert val.imag == 0.0

    def test_against_mpmath_oracle(self):
        val = sph_harm(HarmonicIndex(5, 3), 1.1, 0.7)
        assert abs(val - Y_5_3_AT_1p1_0p7) <= 1e-13 * abs(Y_5_3_AT_1p1_0p7)

    def test_conjugation_symmetry(self):
        rng = np.random.default_rng(0)
        theta = rng.uniform(0.05, np.pi - 0.05, 40)
        phi = rng.uniform(0, 2 * np.pi, 40)
        for l in range(13):
            for m in range(1, l + 1):
                plus = sph_harm(HarmonicIndex(l, m), theta, phi)
                minus = sph_harm(HarmonicIndex(l, -m), theta, phi)
                assert np.max(np.abs(minus - (-1.0) ** m * np.conj(plus))) <= 1e-14

    def test_matrix_agrees_with_scalar(self):
        rng = np.random.default_rng(1)
        theta = rng.uniform(0, np.pi, 25)
        phi = rng.uniform(0, 2 * np.pi, 25)
        mat = sph_harm_matrix(6, theta, phi)
        for l in range(7):
            for m in range(-l, l + 1):
                idx = HarmonicIndex(l, m)
                assert np.max(np.abs(mat[:, idx.flat] - sph_harm(idx, theta, phi))) <= 1e-14

    def test_orthonormality_under_product_rule(self):
        rule = sphere_rule(1.0, (0, 0, 0), 16, 34)
        n = rule.normals
        theta = np.arccos(np.clip(n[:, 2], -1, 1))
        phi = np.arctan2(n[:, 1], n[:, 0])
        basis = sph_harm_matrix(10, theta, phi)
        gram = basis.conj().T @ (rule.weights[:, None] * basis)
        assert np.max(np.abs(gram - np.eye(gram.shape[0]))) <= 1e-12

    def test_theta_domain_check(self):
        with pytest.raises(DomainError):
            sph_harm(HarmonicIndex(1, 0), -0.5, 0.0)
        with pytest.raises(DomainError):
            sph_harm(HarmonicIndex(1, 0), 3.5, 0.0)


class TestSphHarmDerivatives:
    def test_constant_harmonic_derivative_vanishes(self):
        for theta in (0.0, 0.3, np.pi / 2, np.pi):
            dth, dph = sph_harm_derivatives(HarmonicIndex(0, 0), theta, 0.4)
            assert dth == 0 and dph == 0

    def test_l1_closed_form_at_equator(self):
        dth, _ = sph_harm_derivatives(HarmonicIndex(1, 0), np.pi / 2, 0.0)
        assert dth.real == pytest.approx(-math.sqrt(3 / (4 * math.pi)), abs=1e-12)

    @pytest.mark.parametrize(
        "l,m,theta,phi",
        [(4, 2, 0.9, 0.3), (7, -3, 1.7, 2.2), (10, 10, 0.4, 5.0), (6, 0, 2.4, 1.0)],
    )
    def test_matches_finite_differences(self, l, m, theta, phi):
        idx = HarmonicIndex(l, m)
        h = 1e-6
        dth, dph = sph_harm_derivatives(idx, theta, phi)
        fd_th = (sph_harm(idx, theta + h, phi) - sph_harm(idx, theta - h, phi)) / (2 * h)
        fd_ph = (sph_harm(idx, theta, phi + h) - sph_harm(idx, theta, phi - h)) / (2 * h)
        assert abs(dth - fd_th) <= 1e-8
        assert abs(dph - fd_ph) <= 1e-8

    def test_value_anchor(self):
        val = sph_harm(HarmonicIndex(4, 2), 0.9, 0.3)
        assert abs(val - Y_4_2_AT_0p9_0p3) <= 1e-13

    def test_pole_limits(self):
        # only |m| = 1 has a nonzero theta-derivative limit at the poles
        dth, dph = sph_harm_derivatives(HarmonicIndex(1, 1), 0.0, 0.0)
        assert dth.real == pytest.approx(-math.sqrt(3 / (8 * math.pi)), abs=1e-12)
        assert dph == 0
        for m in (0, 2):
            dth, _ = sph_harm_derivatives(HarmonicIndex(3, m), 0.0, 1.0)
            assert dth == 0
        # pole limit agrees with one-sided finite differences of Y just off
        # the pole
        eps = 1e-6
        for l in (2, 5):
            dth, _ = sph_harm_derivatives(HarmonicIndex(l, 1), 0.0, 0.0)
            fd = sph_harm(HarmonicIndex(l, 1), eps, 0.0) / eps
            assert abs(dth - fd) <= 1e-4 * abs(dth)

    def test_dphi_is_im_y(self):
        idx = HarmonicIndex(5, -2)
        theta, phi = 1.2, 0.9
        _, dph = sph_harm_derivatives(idx, theta, phi)
        assert abs(dph - 1j * (-2) * sph_harm(idx, theta, phi)) <= 1e-14


class TestSphericalBessel:
    def test_j0_closed_form(self):
        assert sph_bessel_j(0, 1.0) == pytest.approx(math.sin(1.0) / 1.0, abs=1e-12)
        assert sph_bessel_j(0, 1.0) == pytest.approx(0.8414709848, abs=1e-9)

    def test_wronskian_identity_point(self):
        l, x = 7, 3.5
        w = sph_bessel_j(l, x) * sph_bessel_y(l, x, derivative=True) - sph_bessel_j(
            l, x, derivative=True
        ) * sph_bessel_y(l, x)
        assert abs(w * x * x - 1.0) <= 1e-12

    def test_wronskian_identity_grid(self):
        x = np.logspace(np.log10(0.05), np.log10(50.0), 60)
        worst = 0.0
        for l in range(36):
            w = sph_bessel_j(l, x) * sph_bessel_y(l, x, derivative=True) - sph_bessel_j(
                l, x, derivative=True
            ) * sph_bessel_y(l, x)
            worst = max(worst, float(np.max(np.abs(w * x * x - 1.0))))
        assert worst <= 1e-10

    def test_against_series_oracle(self):
        assert abs(sph_bessel_j(25, 10.0) - J_25_AT_10) <= 1e-12 * abs(J_25_AT_10)
        assert abs(sph_bessel_j(7, 3.5) - J_7_AT_3p5) <= 1e-12 * abs(J_7_AT_3p5)
        assert abs(sph_bessel_y(12, 0.8) - Y_12_AT_0p8) <= 1e-12 * abs(Y_12_AT_0p8)

    def test_hankel_combination(self):
        l, x = 9, 4.2
        h = sph_hankel1(l, x)
        assert h == sph_bessel_j(l, x) + 1j * sph_bessel_y(l, x)

    def test_hankel_asymptotics(self):
        x = 1e4
        for l in range(6):
            assert abs(x * abs(sph_hankel1(l, x)) - 1.0) <= 1e-3

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            sph_bessel_j(3, 0.0)
        with pytest.raises(DomainError):
            sph_bessel_j(3, -1.0)
        with pytest.raises(DomainError):
            sph_bessel_j(DEGREE_CAP + 1, 1.0)

    def test_y_overflow_is_explicit(self):
        with pytest.raises(OverflowError):
            sph_bessel_y(40, 1e-7)
