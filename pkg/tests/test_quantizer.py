import math

import numpy as np
import pytest

from paradiff.errors import ParameterError, SizeError
from paradiff.quantizer import (
    BWOperator,
    MatrixOperator,
    adjoint_residual,
    composition_residual,
    matrix_apply,
    op_bony_weyl,
    op_bony_weyl_via_regularize,
    op_quantize,
    reality_violation,
    self_adjoint_residual,
    weyl_from_standard,
)
from paradiff.spectral import DoubledState, PeriodicGrid, SpectralField, to_coeffs
from paradiff.symbols import DiscreteSymbol, MatrixSymbol, make_cutoff

N = 32
SQ = math.sqrt(2 * math.pi)


@pytest.fixture
def grid():
    return PeriodicGrid(N)


def smooth(grid, seed, width=3, real=False):
    rng = np.random.default_rng(seed)
    c = np.zeros(grid.n, complex)
    j = np.arange(-width, width + 1)
    c[j + grid.n // 2] = (rng.normal(size=j.size) + 1j * rng.normal(size=j.size)) / (1 + j**2)
    f = SpectralField(grid, c)
    if real:
        f = SpectralField.from_samples(f.samples.real + 0j, grid)
    return f


def oracle(coeff: SpectralField, k_pow: int, sigma: float, u: np.ndarray, chi=None) -> np.ndarray:
    """Direct double sum for a = c(x) (i xi)^k."""
    n = u.size
    ch = coeff.coeffs / SQ
    out = np.zeros(n, complex)
    for ki in range(n):
        k = ki - n // 2
        for ji in range(n):
            j = ji - n // 2
            m = k - j
            if not -n // 2 < m < n // 2:
                continue
            xi = (1 - sigma) * k + sigma * j
            w = 1.0 if chi is None else chi(m, xi)
            out[ki] += w * ch[m + n // 2] * (1j * xi) ** k_pow * u[ji]
    return out


@pytest.mark.parametrize("sigma", [0.0, 0.5, 1.0])
def test_identity_symbol(grid, sigma):
    u = smooth(grid, 0, width=15)
    out = op_quantize(DiscreteSymbol.constant(grid, 1.0), sigma, u)
    np.testing.assert_array_equal(out.coeffs, u.coeffs)


@pytest.mark.parametrize("sigma", [0.0, 0.5, 1.0])
def test_constant_second_order_multiplier(grid, sigma):
    u = SpectralField.mode(grid, 1)
    out = op_quantize(DiscreteSymbol.from_monomials({2: 1.0}, grid), sigma, u)
    np.testing.assert_allclose(out.coeffs, -u.coeffs, atol=1e-14)


def test_x_only_weyl_symbol_multiplies(grid):
    a = DiscreteSymbol.from_monomials({0: SpectralField.from_samples(np.exp(1j * grid.nodes), grid)}, grid)
    u = SpectralField.mode(grid, 3)
    out = op_quantize(a, 0.5, u)
    np.testing.assert_allclose(out.samples, np.exp(4j * grid.nodes), atol=1e-13)


@pytest.mark.parametrize("sigma", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("k_pow", [0, 1, 2])
def test_matches_double_sum(grid, sigma, k_pow):
    c = smooth(grid, 10 + k_pow)
    u = smooth(grid, 20, width=12)
    a = DiscreteSymbol.from_monomials({k_pow: c}, grid)
    np.testing.assert_allclose(op_quantize(a, sigma, u).coeffs, oracle(c, k_pow, sigma, u.coeffs), atol=1e-11)


def test_sigma_rejected(grid):
    with pytest.raises(ParameterError):
        BWOperator(DiscreteSymbol.constant(grid, 1.0), None, 0.3)
    with pytest.raises(ParameterError):
        BWOperator(DiscreteSymbol.constant(grid, 1.0), make_cutoff(0.5), 1.0)


def test_grid_mismatch(grid):
    op = BWOperator(DiscreteSymbol.constant(grid, 1.0))
    with pytest.raises(SizeError):
        op(np.ones(16))


# Weyl change of quantization ------------------------------------------------


def test_weyl_constant_unchanged(grid):
    a = DiscreteSymbol.from_monomials({2: 1.5, 1: 0.2}, grid)
    xi = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(weyl_from_standard(a).evaluate(xi), a.evaluate(xi))


@pytest.mark.parametrize("k_pow", [1, 2])
def test_weyl_reproduces_standard(grid, k_pow):
    a = DiscreteSymbol.from_monomials({k_pow: smooth(grid, 4)}, grid)
    std = BWOperator(a, None, sigma=1.0).dense
    wey = BWOperator(weyl_from_standard(a), None, sigma=0.5).dense
    # rows/columns touching off-grid shifts are truncated differently
    core = slice(4, N - 4)
    np.testing.assert_allclose(wey[core, core], std[core, core], atol=1e-11)


def test_weyl_second_order_correction(grid):
    c = smooth(grid, 6, real=True)
    b = weyl_from_standard(DiscreteSymbol.from_monomials({2: c}, grid))
    cxx = SpectralField(grid, c.coeffs * -(np.where(np.arange(N) == 0, 0, np.arange(N) - N // 2) ** 2))
    cx = SpectralField(grid, c.coeffs * 1j * np.where(np.arange(N) == 0, 0, np.arange(N) - N // 2))
    np.testing.assert_allclose(b.monomial_coeff(0).samples, 0.25 * cxx.samples, atol=1e-12)
    np.testing.assert_allclose(b.monomial_coeff(1).samples, -cx.samples, atol=1e-12)


# Bony-Weyl ------------------------------------------------------------------


def test_bony_weyl_identity(grid):
    u = smooth(grid, 1, width=15)
    out = op_bony_weyl(DiscreteSymbol.constant(grid, 1.0), make_cutoff(0.5), u)
    np.testing.assert_array_equal(out.coeffs, u.coeffs)


def test_bony_weyl_high_frequency_shift():
    g = PeriodicGrid(256)
    a = DiscreteSymbol.from_monomials({0: SpectralField.from_samples(np.exp(1j * g.nodes), g)}, g)
    out = op_bony_weyl(a, make_cutoff(0.5), SpectralField.mode(g, 100))
    np.testing.assert_allclose(out.samples, np.exp(101j * g.nodes), atol=1e-12)


def test_bony_weyl_matches_oracle_and_regularized_path(grid):
    chi = make_cutoff(0.5)
    c = SpectralField.from_samples(np.cos(grid.nodes) + 0j, grid)
    a = DiscreteSymbol.from_monomials({1: c}, grid)
    u = smooth(grid, 3, width=14)
    got = op_bony_weyl(a, chi, u).coeffs
    np.testing.assert_allclose(got, oracle(c, 1, 0.5, u.coeffs, chi), atol=1e-12)
    np.testing.assert_allclose(got, op_bony_weyl_via_regularize(a, chi, u).coeffs, atol=1e-12)


def test_x_independent_symbol_exact_multiplier():
    g = PeriodicGrid(256)
    from paradiff.symbols import xi_grid

    tab = np.exp(-0.01 * xi_grid(256) ** 2) * (1 + 1j * xi_grid(256))
    u = smooth(g, 9, width=120)
    out = op_bony_weyl(DiscreteSymbol.multiplier(g, tab), make_cutoff(0.5), u)
    k = np.arange(256) - 128
    np.testing.assert_allclose(out.coeffs, np.exp(-0.01 * k**2) * (1 + 1j * k) * u.coeffs, atol=1e-12)


# adjoints --------------------------------------------------------------------


def test_adjoint_examples(grid):
    chi = make_cutoff(0.5)
    assert adjoint_residual(DiscreteSymbol.from_monomials({2: 1.0}, grid), chi) < 1e-12
    c = smooth(grid, 2, real=True)
    assert adjoint_residual(DiscreteSymbol.from_monomials({0: c}, grid), chi) < 1e-10
    ic = DiscreteSymbol.from_monomials({0: c.scale(1j)}, grid)
    M = BWOperator(ic, chi).dense
    assert self_adjoint_residual(ic, chi) == pytest.approx(2 * np.linalg.norm(M, 2), rel=1e-10)
    assert adjoint_residual(ic, chi) < 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_random_real_symbols_self_adjoint(grid, seed):
    a = DiscreteSymbol.from_monomials({2: smooth(grid, seed, real=True), 0: smooth(grid, seed + 9, real=True)}, grid)
    assert self_adjoint_residual(a, make_cutoff(0.5)) < 1e-10


# matrix operators -------------------------------------------------------------


def test_matrix_apply_examples(grid):
    chi = make_cutoff(0.5)
    u = SpectralField.from_samples(np.exp(1j * grid.nodes), grid)
    st = DoubledState.from_scalar(u)
    zero = matrix_apply(MatrixSymbol.zero(grid), chi, st)
    assert np.max(np.abs(zero.array)) == 0.0
    A = MatrixSymbol(DiscreteSymbol.from_monomials({2: 1.0}, grid), DiscreteSymbol.zero(grid))
    out = matrix_apply(A, chi, st)
    np.testing.assert_allclose(out.array, -st.array, atol=1e-13)


@pytest.mark.parametrize("seed", range(3))
def test_matrix_apply_keeps_reality(grid, seed):
    A = MatrixSymbol(
        DiscreteSymbol.from_monomials({2: smooth(grid, seed), 1: smooth(grid, seed + 1)}, grid),
        DiscreteSymbol.from_monomials({2: smooth(grid, seed + 2), 0: smooth(grid, seed + 3)}, grid),
    )
    st = DoubledState.from_scalar(smooth(grid, seed + 4, width=10))
    out = MatrixOperator(A, make_cutoff(0.5))(st.array)
    assert reality_violation(out) < 1e-12


def test_composition_residual_decreases():
    g = PeriodicGrid(128)
    a = DiscreteSymbol.from_monomials({1: smooth(g, 1)}, g)
    b = DiscreteSymbol.from_monomials({1: smooth(g, 2)}, g)
    r = [composition_residual(a, b, make_cutoff(0.5), rho) for rho in (1, 2, 3)]
    assert r[0] > r[1] > r[2]
