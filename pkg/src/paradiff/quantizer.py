"""Standard, Weyl and Bony-Weyl quantization as banded Fourier double sums.

Mode k of the output receives sum_j c_{k-j}(xi) u_j with c_m(xi) the plain
average coefficient of x -> a(x, xi) and xi = (1 - sigma) k + sigma j. With
the e^{ijx}/sqrt(2 pi) convention this makes Op(1) the identity exactly.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import _kernels
from .errors import ParameterError, SizeError
from .spectral import DoubledState, SpectralField, conj_reflect, reflect_index
from .symbols import (
    CutoffProfile,
    DiscreteSymbol,
    MatrixSymbol,
    chi_table,
    ones_table,
    regularize,
    sharp_product,
    weyl_from_standard,
)

__all__ = [
    "BWOperator",
    "MatrixOperator",
    "op_quantize",
    "op_bony_weyl",
    "weyl_from_standard",
    "adjoint_residual",
    "self_adjoint_residual",
    "matrix_apply",
    "matrix_self_adjoint_residual",
    "composition_residual",
]

_SIGMA2 = {0.0: 0, 0.5: 1, 1.0: 2}


class BWOperator:
    """Banded matrix of Op_sigma(a) (cutoff=None) or Op^BW(a) (sigma = 1/2)."""

    def __init__(self, sym: DiscreteSymbol, cutoff: CutoffProfile | None = None, sigma: float = 0.5):
        if float(sigma) not in _SIGMA2:
            raise ParameterError("sigma must be 0, 1/2 or 1", sigma=sigma)
        n = sym.n
        self.n = n
        self.sym = sym
        self.cutoff = cutoff
        if cutoff is None:
            bw = n // 2 - 1
            chi = ones_table(n, bw)
        else:
            if float(sigma) != 0.5:
                raise ParameterError("Bony-Weyl quantization uses sigma = 1/2", sigma=sigma)
            bw = cutoff.bandwidth(n)
            chi = chi_table(n, cutoff.delta, bw)
        self.bw = bw
        if not sym.terms:
            self.band = np.zeros((n, 2 * bw + 1), dtype=complex)
        else:
            coef, prof = sym.kernel_arrays()
            self.band = _kernels.band_build(coef, prof, chi, _SIGMA2[float(sigma)], bw)

    def __call__(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c)
        if c.shape[-1] != self.n:
            raise SizeError("field and symbol live on different grids", expected=self.n, got=c.shape[-1])
        return _kernels.band_apply(self.band, c)

    def apply(self, u: SpectralField) -> SpectralField:
        return SpectralField(u.grid, self(u.coeffs))

    @cached_property
    def dense(self) -> np.ndarray:
        return _kernels.band_to_dense(self.band)


class MatrixOperator:
    """Four-block operator [[Op(a), Op(b)], [Op(b~), Op(a~)]] on arrays (..., 2, n)."""

    def __init__(self, A: MatrixSymbol, cutoff: CutoffProfile | None):
        self.A = A
        self.n = A.n
        a, b, br, ar = A.blocks()
        self.ops = [BWOperator(s, cutoff) if s.terms else None for s in (a, b, br, ar)]

    def __call__(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=complex)
        out = np.zeros_like(U)
        oa, ob, obr, oar = self.ops
        if oa is not None:
            out[..., 0, :] += oa(U[..., 0, :])
        if ob is not None:
            out[..., 0, :] += ob(U[..., 1, :])
        if obr is not None:
            out[..., 1, :] += obr(U[..., 0, :])
        if oar is not None:
            out[..., 1, :] += oar(U[..., 1, :])
        return out

    @cached_property
    def dense(self) -> np.ndarray:
        n = self.n
        M = np.zeros((2 * n, 2 * n), dtype=complex)
        for (r, c), op in zip(((0, 0), (0, 1), (1, 0), (1, 1)), self.ops):
            if op is not None:
                M[r * n : (r + 1) * n, c * n : (c + 1) * n] = op.dense
        return M


def op_quantize(sym: DiscreteSymbol, sigma: float, u: SpectralField) -> SpectralField:
    return BWOperator(sym, None, sigma).apply(u)


def op_bony_weyl(sym: DiscreteSymbol, cutoff: CutoffProfile, u: SpectralField) -> SpectralField:
    return BWOperator(sym, cutoff).apply(u)


def op_bony_weyl_via_regularize(sym: DiscreteSymbol, cutoff: CutoffProfile, u: SpectralField) -> SpectralField:
    """Reference path: Weyl quantization of the regularized symbol."""
    return op_quantize(regularize(sym, cutoff), 0.5, u)


def adjoint_residual(sym: DiscreteSymbol, cutoff: CutoffProfile | None) -> float:
    """Operator 2-norm of Op^BW(a)^dagger - Op^BW(conj a) on the mode space."""
    M = BWOperator(sym, cutoff).dense
    Mc = BWOperator(sym.conj(), cutoff).dense
    return float(np.linalg.norm(M.conj().T - Mc, 2))


def self_adjoint_residual(sym: DiscreteSymbol, cutoff: CutoffProfile | None) -> float:
    """Operator 2-norm of Op^BW(a)^dagger - Op^BW(a)."""
    M = BWOperator(sym, cutoff).dense
    return float(np.linalg.norm(M.conj().T - M, 2))


def matrix_apply(A: MatrixSymbol, cutoff: CutoffProfile, state: DoubledState) -> DoubledState:
    if state.n != A.n:
        raise SizeError("state and symbol live on different grids", expected=A.n, got=state.n)
    return DoubledState.from_array(MatrixOperator(A, cutoff)(state.array))


def conj_operator(M: np.ndarray) -> np.ndarray:
    """Matrix of u -> conj(M conj(u)) in centered coefficients."""
    r = reflect_index(M.shape[0])
    return np.conj(M[np.ix_(r, r)])


def matrix_self_adjoint_residual(A: MatrixSymbol, cutoff: CutoffProfile | None) -> float:
    """max(||Op(a)* - Op(a)||, ||conj Op(b) - Op(b)*||): the self-adjointness conditions."""
    Ma = BWOperator(A.a, cutoff).dense
    Mb = BWOperator(A.b, cutoff).dense
    # the Nyquist mode is its own reflection, so it carries no conjugate pair
    r1 = np.linalg.norm((Ma.conj().T - Ma)[1:, 1:], 2)
    r2 = np.linalg.norm((conj_operator(Mb) - Mb.conj().T)[1:, 1:], 2)
    return float(max(r1, r2))


def composition_residual(a: DiscreteSymbol, b: DiscreteSymbol, cutoff: CutoffProfile, rho: int, probe_k=None) -> float:
    """max over probes e^{ikx}, |k| = probe_k, of ||Op(a)Op(b)e - Op((a#b)_rho)e||."""
    n = a.n
    k0 = n // 4 if probe_k is None else int(probe_k)
    Oa, Ob = BWOperator(a, cutoff), BWOperator(b, cutoff)
    Oc = BWOperator(sharp_product(a, b, rho), cutoff)
    E = np.zeros((2, n), dtype=complex)
    E[0, k0 + n // 2] = 1.0
    E[1, -k0 + n // 2] = 1.0
    R = Oa(Ob(E)) - Oc(E)
    return float(np.max(np.linalg.norm(R, axis=-1)))


def reality_violation(arr: np.ndarray) -> float:
    return float(np.max(np.abs(arr[..., 1, :] - conj_reflect(arr[..., 0, :]))))
