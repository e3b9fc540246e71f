import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kacspec.core_math import HermiteCoeffs, hermite_psi
from kacspec.errors import AccuracyError, CapabilityError, DomainError
from kacspec.symbols import RadialSymbol, mehler_of_q, phase_q
from kacspec.weyl_quantization import (
    KernelGrid,
    PhaseGrid,
    diagonalization_check,
    even_kernel,
    heat_kernel,
    kernel_from_symbol,
    radial_matrix_diagonal,
    symbol_from_kernel,
    weyl_matrix,
    weyl_matrix_element,
    wigner,
)


def _mehler(t):
    return lambda V, XI: mehler_of_q(t, phase_q(V, XI))


def _oscillator_levels(K):
    return np.arange(K + 1) + 0.5


def test_phase_grid_sizes():
    grid = PhaseGrid()
    assert grid.step_v == pytest.approx(28.0 / 512)
    assert grid.v[grid.points // 2] == 0.0
    wide = PhaseGrid.for_index(30)
    assert wide.half_width == pytest.approx(3.0 * math.sqrt(61))
    assert wide.points == 1024
    assert PhaseGrid.for_index(10) == PhaseGrid()
    with pytest.raises(DomainError):
        PhaseGrid(points=5)
    with pytest.raises(DomainError):
        PhaseGrid(half_width=0.0)


def test_aliasing_is_reported():
    with pytest.raises(AccuracyError) as info:
        PhaseGrid(points=64).check_aliasing()
    assert info.value.diagnostic["limit"] < 14.0


def test_identity_symbol():
    op = weyl_matrix(lambda V, XI: np.ones_like(V), 8, name="one")
    assert_allclose(op.matrix, np.eye(9), atol=1e-10)


def test_oscillator_symbol():
    op = weyl_matrix(lambda V, XI: phase_q(V, XI), 10, name="q")
    assert_allclose(op.diagonal.real, _oscillator_levels(10), atol=1e-8)
    assert op.max_offdiag() < 1e-8


@pytest.mark.parametrize("t", [0.1, 1.0])
def test_mehler_is_diagonal(t):
    report = diagonalization_check(_mehler(t), 10, np.exp(-t * _oscillator_levels(10)), tol=1e-7, name="mehler")
    assert report.passed
    assert report.max_imag < 1e-10
    assert [k for k, _ in report.rows()] == list(range(11))


def test_mehler_composition():
    product = weyl_matrix(_mehler(0.3), 8) @ weyl_matrix(_mehler(0.7), 8)
    assert_allclose(product.matrix, weyl_matrix(_mehler(1.0), 8).matrix, atol=1e-9)
    assert product.symbol_name == "symbol*symbol"


def test_real_symbol_gives_hermitian_matrix():
    op = weyl_matrix(lambda V, XI: V * XI * np.exp(-phase_q(V, XI)), 8)
    assert op.hermitian_defect() < 1e-10
    assert op.max_offdiag() > 1e-3


def test_matrix_element_matches_wigner_pairing():
    symbol = lambda V, XI: np.exp(-phase_q(V - 0.5, XI)) * (1.0 + XI)
    element = weyl_matrix_element(symbol, 1, 2)
    pairing = wigner(lambda v: hermite_psi(2, v), lambda v: hermite_psi(1, v)).pair(symbol)
    assert element == pytest.approx(pairing, abs=1e-10)


def test_wigner_of_ground_state():
    grid = PhaseGrid()
    w = wigner(HermiteCoeffs.unit(0, 0), HermiteCoeffs.unit(0, 0), grid)
    V, XI = grid.mesh()
    assert_allclose(w.values, np.exp(-2.0 * phase_q(V, XI)) / math.pi, atol=1e-12)
    assert w.mass == pytest.approx(1.0, abs=1e-12)


def test_wigner_rejects_undecayed_input():
    with pytest.raises(AccuracyError):
        wigner(lambda v: np.ones_like(v), lambda v: np.ones_like(v))


def test_radial_diagonal_matches_phase_grid():
    K = 8
    assert_allclose(radial_matrix_diagonal(lambda q: q, K), _oscillator_levels(K), atol=1e-10)
    assert_allclose(radial_matrix_diagonal(lambda q: mehler_of_q(1.0, q), K), np.exp(-_oscillator_levels(K)), atol=1e-10)
    table = RadialSymbol.for_kind("mehler", 0.5, q_max=250.0, nodes=1024, t=0.5)
    op = weyl_matrix(table, K, name="mehler")
    assert_allclose(op.diagonal.real, radial_matrix_diagonal(lambda q: mehler_of_q(0.5, q), K), atol=1e-7)


def test_diagonalization_limits():
    with pytest.raises(CapabilityError):
        diagonalization_check(_mehler(1.0), 41, np.zeros(42))
    with pytest.raises(DomainError):
        diagonalization_check(_mehler(1.0), 4, np.zeros(3))


def test_unresolved_index_is_reported():
    with pytest.raises(AccuracyError) as info:
        weyl_matrix(_mehler(1.0), 10, PhaseGrid(half_width=3.0, points=64))
    assert info.value.diagnostic["K"] == 10


def test_sampled_symbol_shape_is_checked():
    with pytest.raises(DomainError):
        weyl_matrix(np.ones((16, 16)), 2)


def test_heat_kernel_symbol_is_mehler():
    samples = symbol_from_kernel(heat_kernel(1.0))
    V, XI = np.meshgrid(samples.v, samples.xi, indexing="ij")
    assert_allclose(samples.values, mehler_of_q(1.0, phase_q(V, XI)), atol=1e-6)
    with pytest.raises(DomainError):
        heat_kernel(0.0)


def test_kernel_symbol_round_trip():
    kernel = heat_kernel(1.0, points=128, v_step=0.2, y_step=0.2)
    back = kernel_from_symbol(symbol_from_kernel(kernel))
    assert back.y_step == pytest.approx(kernel.y_step)
    assert_allclose(back.values.real, kernel.values, atol=1e-12)


def test_identity_kernel_has_unit_symbol():
    samples = symbol_from_kernel(KernelGrid.identity(64, 0.1, 0.1), tail_tol=1.0)
    assert_allclose(samples.values, np.ones((64, 64)), atol=1e-12)


def test_even_kernel():
    kernel = heat_kernel(1.0, points=128, v_step=0.2, y_step=0.2)
    assert_allclose(even_kernel(kernel).values, kernel.values, atol=1e-14)
    v = kernel.v[:, None]
    y = kernel.y[None, :]
    odd = KernelGrid(values=y * np.exp(-v * v - y * y), v_step=kernel.v_step, y_step=kernel.y_step)
    assert_allclose(even_kernel(odd).values, 0.0, atol=1e-14)


def test_ground_state_projection_has_unit_trace():
    op = weyl_matrix(lambda V, XI: 2.0 * np.exp(-2.0 * phase_q(V, XI)), 10, name="p0")
    projection = np.zeros((11, 11))
    projection[0, 0] = 1.0
    assert_allclose(op.matrix, projection, atol=1e-10)
    assert np.trace(op.matrix).real == pytest.approx(1.0, abs=1e-10)


def test_matrix_metadata_and_entries():
    op = weyl_matrix(_mehler(1.0), 3, name="mehler", s=0.5)
    assert op.metadata["symbol"] == "mehler"
    assert op.metadata["s"] == 0.5
    assert op.metadata["K"] == 3
    assert op.metadata["points"] == PhaseGrid().points
    entries = op.entries()
    assert len(entries) == 16
    assert entries[0][:2] == (0, 0)
    assert entries[7][:2] == (1, 3)
    i, j, re, im = entries[5]
    assert re == op.matrix[i, j].real
    assert im == op.matrix[i, j].imag


def test_diagonalization_report_keeps_the_matrix():
    report = diagonalization_check(_mehler(1.0), 4, np.exp(-_oscillator_levels(4)), tol=1e-7, name="mehler")
    assert report.matrix is not None
    assert report.matrix.K == 4
    assert report.matrix.max_offdiag() == report.max_offdiag
