import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kacspec.bobylev import (
    FourierProfile,
    GaussianProfile,
    SampledProfile,
    boltzmann_radial_fourier_apply,
    boltzmann_radial_linearized,
    kac_fourier_apply,
    linearized_kac_apply,
    linearized_kac_matrix,
    maxwellian_profile,
    sphere_fourier_apply,
)
from kacspec.core_math import GridFunction, HermiteBasis, HermiteCoeffs, maxwellian, maxwellian_hat
from kacspec.errors import CapabilityError, DomainError
from kacspec.spectrum import kac_eigenvalue

S = 0.5
K = 6


@pytest.fixture(scope="module")
def operator():
    return linearized_kac_matrix(K, S)


def test_sampled_profile_matches_closed_form():
    f = GridFunction.sample(maxwellian, 25.6, 512)
    profile = SampledProfile.from_grid_function(f)
    zeta = np.array([0.0, 0.3, 1.7, 4.0])
    assert_allclose(profile(zeta), maxwellian_hat(zeta), atol=1e-12)
    assert profile.at_origin() == pytest.approx(1.0, abs=1e-12)
    assert profile.xi_max == pytest.approx(math.pi / 0.1)


def test_gaussian_increments_are_cancellation_free():
    g = GaussianProfile(width=0.5)
    zeta = np.array([2.0])
    shift = np.array([1e-9])
    assert g.increment(zeta, shift)[0].real == pytest.approx(-2e-9 * 0.5 * 2.0 * math.exp(-2.0), rel=1e-6)
    assert g.even_increment(np.array([1e-8]))[0].real == pytest.approx(-0.5e-16, rel=1e-6)


def test_profile_grid_validation():
    with pytest.raises(DomainError):
        FourierProfile(np.array([-1.0, 0.0, 1.0]), np.zeros(3))
    with pytest.raises(DomainError):
        FourierProfile(np.array([-2.0, -1.0, 1.0, 3.0]), np.zeros(4))
    profile = FourierProfile.radial(lambda r: np.exp(-r * r), xi_max=5.0)
    assert profile.is_even(1e-12)
    with pytest.raises(DomainError):
        profile(np.array([6.0]))


def test_maxwellian_is_stationary():
    mu = maxwellian_profile()
    xi = np.linspace(-6.0, 6.0, 25)
    assert_allclose(kac_fourier_apply(mu, mu, S, xi).values, 0.0, atol=1e-13)


def test_interpolation_range_is_checked():
    narrow = FourierProfile.radial(lambda r: np.exp(-r * r), xi_max=5.0)
    with pytest.raises(DomainError):
        kac_fourier_apply(maxwellian_profile(), narrow, S, np.linspace(-6.0, 6.0, 5))


def test_conserved_modes_are_annihilated(operator):
    assert_allclose(operator[:, 0], 0.0, atol=1e-8)
    assert_allclose(operator[:, 2], 0.0, atol=1e-8)


def test_oracle_reproduces_eigenvalues(operator):
    for k in range(K + 1):
        lam = kac_eigenvalue(k, S)
        assert operator[k, k].real == pytest.approx(lam, abs=1e-5 * max(lam, 1.0))
    off = operator - np.diag(np.diag(operator))
    assert np.max(np.abs(off)) < 1e-5


def test_parity_is_preserved(operator):
    even = np.arange(K + 1) % 2 == 0
    assert np.max(np.abs(operator[np.ix_(~even, even)])) < 1e-8
    assert np.max(np.abs(operator[np.ix_(even, ~even)])) < 1e-8


def test_apply_is_linear(operator):
    rng = np.random.default_rng(7)
    h = HermiteCoeffs(coeffs=rng.standard_normal(K + 1), basis=HermiteBasis(K))
    image = linearized_kac_apply(h, S)
    assert_allclose(image.coeffs, operator @ h.coeffs, atol=1e-9)


def test_band_limit():
    with pytest.raises(CapabilityError):
        linearized_kac_matrix(31, S)


def test_sphere_formula_matches_radial_reduction():
    def mu_hat(z):
        return np.exp(-0.5 * np.dot(z, z))

    def f_hat(z):
        return np.exp(-0.3 * np.dot(z, z))

    points = np.array([[1.0, 0.5], [0.0, 2.0]])
    radii = np.hypot(points[:, 0], points[:, 1])
    xi = np.array([-radii[1], -radii[0], radii[0], radii[1]])
    radial = boltzmann_radial_fourier_apply(maxwellian_profile(), GaussianProfile(width=0.3), S, 2, xi)
    assert_allclose(sphere_fourier_apply(mu_hat, f_hat, S, points), radial.values[2:], rtol=1e-7)
    with pytest.raises(CapabilityError):
        sphere_fourier_apply(mu_hat, f_hat, S, points, d=3)


def test_radial_linearized_annihilates_maxwellian():
    xi = np.linspace(-5.0, 5.0, 21)
    result = boltzmann_radial_linearized(maxwellian_profile(), S, 3, xi)
    assert_allclose(result.values, 0.0, atol=1e-12)
    with pytest.raises(DomainError):
        boltzmann_radial_linearized(maxwellian_profile(), S, 0, xi)


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_oracle_matches_spectrum_up_to_twenty(s):
    matrix = linearized_kac_matrix(20, s)
    for k in range(21):
        lam = kac_eigenvalue(k, s)
        if k in (0, 2):
            assert abs(matrix[k, k]) <= 1e-8
        else:
            assert matrix[k, k].real == pytest.approx(lam, rel=1e-5)
    assert np.max(np.abs(matrix - np.diag(np.diag(matrix)))) <= 1e-5
