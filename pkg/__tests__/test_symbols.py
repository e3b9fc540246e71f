import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

import kacspec.symbols as symbols_module
from kacspec.errors import ConsistencyError, DomainError
from kacspec.singular_quadrature import beta_eval
from kacspec.spectrum import c0, d0
from kacspec.symbols import (
    PhasePoint,
    RadialSymbol,
    constructive_coefficients,
    expansion_coefficients,
    fit_leading_constants,
    full_symbol,
    l1_of_q,
    l1_remainder,
    l1_symbol,
    l1_symbol_d,
    l2_of_q,
    l2_projection_series,
    l2_symbol,
    l2_symbol_d,
    mehler_of_q,
    mehler_symbol,
    phase_q,
    projection_symbol,
    residual_slope,
    taylor_coefficients,
)

ORIGIN = PhasePoint.origin()


def _beta_quad(bracket, s):
    """2 int_0^{pi/4} beta(theta) bracket(theta) dtheta for brackets vanishing like theta^2."""
    value, _ = integrate.quad(lambda theta: beta_eval(theta, s) * bracket(theta), 0.0, math.pi / 4.0, epsabs=1e-13, epsrel=1e-12)
    return 2.0 * value


def test_phase_point():
    p = PhasePoint(v=[2.0], xi=[1.0])
    assert p.d == 1
    assert p.q == pytest.approx(2.0)
    assert p.lam == pytest.approx(3.0)
    assert phase_q(2.0, 1.0) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        PhasePoint(v=[0.0, 1.0], xi=[0.0])


def test_mehler_symbol():
    p = PhasePoint(v=[1.3], xi=[-0.4])
    assert mehler_symbol(0.0, p) == pytest.approx(1.0)
    assert mehler_symbol(1.0, ORIGIN) == pytest.approx(1.0 / math.cosh(0.5))
    assert mehler_symbol(1.0, PhasePoint.origin(3)) == pytest.approx(math.cosh(0.5) ** -3)
    with pytest.raises(DomainError):
        mehler_of_q(-1.0, 0.0)


def test_projection_symbols_sum_to_mehler():
    q = np.array([0.0, 0.3, 1.0, 4.0])
    t = 1.0
    for d in (1, 2):
        total = sum(math.exp(-t * (k + 0.5 * d)) * projection_symbol(k, q, d) for k in range(80))
        assert_allclose(total, mehler_of_q(t, q, d), rtol=1e-10, atol=1e-14)
    assert_allclose(projection_symbol(0, q), 2.0 * np.exp(-2.0 * q))


def test_l1_at_origin():
    expected = -4.0 * math.log(1.0 / math.cos(math.pi / 8.0) + math.tan(math.pi / 8.0))
    assert l1_symbol(ORIGIN, 0.5) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(-1.6127988766460464, rel=1e-13)


def test_l2_at_origin_matches_reduced_bracket():
    value = l2_symbol(ORIGIN, 0.5)
    assert value == pytest.approx(-_beta_quad(lambda th: 2.0 * math.tan(th) ** 2, 0.5), rel=1e-9)

    def bracket_d2(theta):
        sigma = math.sin(theta)
        return 4.0 - 2.0 * (1.0 + sigma) ** -2 - 2.0 * (1.0 - sigma) ** -2

    assert l2_symbol_d(PhasePoint.origin(2), 0.5) == pytest.approx(_beta_quad(bracket_d2, 0.5), rel=1e-9)


def test_one_dimensional_reduction():
    p = PhasePoint(v=[0.7], xi=[1.1])
    assert l1_symbol_d(p, 0.4) == l1_symbol(p, 0.4)
    assert l2_symbol_d(p, 0.4) == l2_symbol(p, 0.4)
    assert full_symbol(p, 0.4) == pytest.approx(l1_symbol(p, 0.4) + l2_symbol(p, 0.4), rel=1e-14)
    with pytest.raises(DomainError):
        l1_symbol(PhasePoint.origin(2), 0.4)


def test_vectorized_table_matches_pointwise():
    q = np.array([0.0, 0.5, 3.0, 40.0])
    table = l1_of_q(q, 0.5)
    for qq, value in zip(q, table):
        assert l1_of_q(float(qq), 0.5) == pytest.approx(value, abs=1e-9)


def test_l2_equals_projection_series():
    q = np.array([0.0, 0.5, 2.0])
    assert_allclose(l2_of_q(q, 0.5), l2_projection_series(q, 0.5), rtol=1e-8, atol=1e-10)


def test_l2_gaussian_decay_on_grid():
    axis = np.linspace(-6.0, 6.0, 41)
    V, XI = np.meshgrid(axis, axis, indexing="ij")
    q = phase_q(V, XI)
    unique, inverse = np.unique(q.ravel(), return_inverse=True)
    values = np.asarray(l2_of_q(unique, 0.5))[inverse].reshape(q.shape)
    weighted = np.abs(values) * np.exp(q / 3.0)
    assert np.all(np.isfinite(weighted))
    assert weighted.max() <= 2.0 * weighted[q <= 1.0].max()


def test_taylor_and_constructive_coefficients():
    a = taylor_coefficients(0.5, 3)
    assert a[0] == pytest.approx(1.0)
    assert a[1] == pytest.approx(2.5)
    assert taylor_coefficients(0.5, 1, d=3)[1] == pytest.approx(4.5)
    c = constructive_coefficients(0.5, 2)
    assert c[0] == pytest.approx(-(2.0 ** 0.5) * math.gamma(0.5) * 2.5)


@pytest.mark.parametrize("lam", [50.0, 200.0])
def test_remainder_matches_direct_difference(lam):
    direct = l1_of_q(lam - 1.0, 0.5, tol=1e-13, relative=True) - (c0(0.5) * lam ** 0.5 - d0(0.5))
    assert l1_remainder(lam, 0.5) == pytest.approx(direct, rel=1e-7)
    with pytest.raises(DomainError):
        l1_remainder(0.5, 0.5)


def test_expansion_residual_slopes():
    expansion = expansion_coefficients(0.5, 2)
    assert expansion.provenance == ["constructive", "constructive"]
    assert expansion.fit_relative_errors[1] <= 0.01
    wide = np.logspace(2.0, 6.0, 9)
    assert residual_slope(expansion, 0, wide) == pytest.approx(-0.5, abs=0.15)
    assert residual_slope(expansion, 1, wide) == pytest.approx(-1.5, abs=0.15)
    narrow = np.logspace(2.0, 4.0, 7)
    assert residual_slope(expansion, 2, narrow) == pytest.approx(-2.5, abs=0.15)


def test_expansion_evaluate_tracks_l1():
    expansion = expansion_coefficients(0.5, 3, fit=False)
    lam = 400.0
    assert expansion.evaluate(lam) == pytest.approx(l1_of_q(lam - 1.0, 0.5), rel=1e-7)


def test_expansion_argument_checks():
    with pytest.raises(DomainError):
        expansion_coefficients(0.5, 7)
    with pytest.raises(DomainError):
        expansion_coefficients(0.5, 2, prefer="median")


def test_expansion_surfaces_route_disagreement(monkeypatch):
    monkeypatch.setattr(symbols_module, "fit_remainder_coefficients", lambda s, terms, d=1: np.full(terms, 1.0))
    with pytest.raises(ConsistencyError) as info:
        expansion_coefficients(0.5, 2)
    assert info.value.diagnostic["j"] == 1


@pytest.mark.parametrize("d", [1, 2, 3])
def test_leading_constants_do_not_depend_on_dimension(d):
    A, B = fit_leading_constants(0.5, d)
    assert A == pytest.approx(c0(0.5), rel=0.02)
    assert B == pytest.approx(d0(0.5), rel=0.02)


def test_radial_symbol_table():
    table = RadialSymbol.for_kind("mehler", 0.5, q_max=50.0, nodes=1024, t=1.0)
    q = np.array([0.0, 0.37, 5.2, 49.0])
    assert_allclose(table(q), mehler_of_q(1.0, q), atol=1e-9)
    assert_allclose(table.on_phase(np.array([2.0]), np.array([1.0])), mehler_of_q(1.0, 2.0), atol=1e-9)
    with pytest.raises(DomainError):
        table(60.0)
    with pytest.raises(DomainError):
        RadialSymbol.for_kind("l3", 0.5)


def test_symbols_are_radial():
    rng = np.random.default_rng(7)
    v, xi = rng.uniform(-4.0, 4.0, (2, 200))
    q = phase_q(v, xi)
    angle = rng.uniform(0.0, 2.0 * math.pi, 200)
    rotated = phase_q(2.0 * np.sqrt(q) * np.cos(angle), np.sqrt(q) * np.sin(angle))
    assert_allclose(rotated, q, rtol=1e-14)
    both = np.concatenate([q, rotated])
    for evaluate in (l1_of_q, l2_of_q):
        values = evaluate(both, 0.5)
        assert_allclose(values[200:], values[:200], rtol=1e-10, atol=1e-10)
    first, second = PhasePoint(v=[2.0], xi=[1.0]), PhasePoint(v=[0.0], xi=[math.sqrt(2.0)])
    assert full_symbol(first, 0.5) == pytest.approx(full_symbol(second, 0.5), rel=1e-10)
