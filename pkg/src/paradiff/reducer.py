"""Four-stage reduction of the paralinearized system to constant coefficients.

Stage 1 diagonalizes the principal matrix symbol, stage 2 removes the
off-diagonal first-order part, stage 3 flattens the principal coefficient by a
paracomposition (time-one map of a Bony-Weyl transport flow), stage 4 flattens
the first-order coefficient by a multiplication operator.

All stage maps act on coefficient arrays of shape (..., 2, n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, EllipticityError, ParameterError
from .nonlinear import A_fields, ParalinearizedSystem, structural_gate
from .quantizer import BWOperator, MatrixOperator
from .spectral import (
    SQRT2PI,
    DoubledState,
    PeriodicGrid,
    PotentialSpec,
    SpectralField,
    antiderivative_coeffs,
    d_samples,
    lambda_multipliers,
    to_coeffs,
    to_samples,
    trig_eval,
    xi_effective,
)
from .symbols import (
    CutoffProfile,
    DiscreteSymbol,
    MatrixSymbol,
    XiProfile,
    SymbolTerm,
    exp_antidiag,
    shc_series,
    xi_grid,
)

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 50
TAU_START = 16
TAU_TOL = 1e-9
TAU_MAX = 2048

_E = np.array([1.0, -1.0])


def _func_symbol(grid, samples) -> DiscreteSymbol:
    return DiscreteSymbol.from_monomials({0: np.asarray(samples, dtype=complex)}, grid, order=0)


def _norm(X) -> float:
    return float(np.sqrt(np.sum(np.abs(X) ** 2)))


# ---------------------------------------------------------------------------
# stage 1


@dataclass
class Step1Result:
    lam: np.ndarray
    a2_new: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    z: np.ndarray
    C: np.ndarray  # (n, 2, 2) pointwise exp(Z) = S^{-1}
    S: np.ndarray
    forward: MatrixOperator | None
    inverse: MatrixOperator | None
    residual: float
    det_residual: float


def _mat2(p, q) -> np.ndarray:
    """Pointwise [[p, q], [conj q, conj p]] with shape (n, 2, 2)."""
    return np.stack([np.stack([p, q], -1), np.stack([np.conj(q), np.conj(p)], -1)], -2)


def step1_diagonalize(a2, b2, cutoff: CutoffProfile | None = None, margin: float = 0.0) -> Step1Result:
    a2 = np.asarray(a2, dtype=complex)
    b2 = np.asarray(b2, dtype=complex)
    n = a2.size
    p = 1.0 + a2.real
    det = p**2 - np.abs(b2) ** 2
    i1, i2 = int(np.argmin(p)), int(np.argmin(det))
    if p[i1] <= margin or det[i2] <= margin:
        x = 2 * np.pi * np.arange(n) / n
        raise EllipticityError(
            "principal symbol is not elliptic",
            min_1_plus_a2=float(p[i1]),
            argmin_1_plus_a2_x=float(x[i1]),
            min_determinant=float(det[i2]),
            argmin_determinant_x=float(x[i2]),
        )
    lam = np.sqrt(det)
    N = np.sqrt(2.0 * lam * (p + lam))
    s1 = (p + lam) / N
    s2 = -b2 / N
    S = _mat2(s1.astype(complex), s2)
    C = _mat2(s1.astype(complex), -s2)
    # |z| = arccosh(s1), z = c2 |z| / sinh|z|
    r = np.arccosh(np.maximum(s1, 1.0))
    z = -s2 / shc_series(r**2)
    c1, c2 = exp_antidiag(z)
    det_res = float(np.max(np.abs(c1**2 - np.abs(c2) ** 2 - 1.0)))
    P = np.zeros((n, 2, 2), dtype=complex)
    P[:, 0, 0], P[:, 0, 1], P[:, 1, 0], P[:, 1, 1] = p, b2, -np.conj(b2), -p
    D = C @ P @ S
    target = np.zeros_like(D)
    target[:, 0, 0], target[:, 1, 1] = lam, -lam
    res = float(np.max(np.abs(D - target)))
    fwd = inv = None
    if cutoff is not None and np.max(np.abs(z)) > 1e-15:
        grid = PeriodicGrid(n)
        fwd = MatrixOperator(MatrixSymbol(_func_symbol(grid, c1), _func_symbol(grid, c2)), cutoff)
        inv = MatrixOperator(MatrixSymbol(_func_symbol(grid, c1), _func_symbol(grid, -c2)), cutoff)
    return Step1Result(lam, lam - 1.0, s1, s2, z, C, S, fwd, inv, res, det_res)


def first_order_after_step1(fields: dict, st1: Step1Result) -> tuple[np.ndarray, np.ndarray]:
    """(a1, b1) of E[C P dx(S) - dx(C) P S + C E A1 S], the new first-order symbol."""
    n = st1.lam.size
    p = 1.0 + fields["a2"].real
    b2 = fields["b2"]
    P = np.zeros((n, 2, 2), dtype=complex)
    P[:, 0, 0], P[:, 0, 1], P[:, 1, 0], P[:, 1, 1] = p, b2, -np.conj(b2), -p
    A1 = _mat2(fields["a1"], fields["b1"])
    Q = _E[None, :, None] * A1
    C, S = st1.C, st1.S
    Cx = d_samples(np.moveaxis(C, 0, -1), 1)
    Sx = d_samples(np.moveaxis(S, 0, -1), 1)
    Cx, Sx = np.moveaxis(Cx, -1, 0), np.moveaxis(Sx, -1, 0)
    X = C @ Q @ S - Cx @ P @ S + C @ P @ Sx
    A1n = _E[None, :, None] * X
    return A1n[:, 0, 0], A1n[:, 0, 1]


# ---------------------------------------------------------------------------
# stage 2


def gamma_profile(n: int) -> np.ndarray:
    """1/(i xi) for |xi| >= 1/2, odd cubic Hermite continuation inside."""
    xi = xi_grid(n)
    out = np.empty(xi.size, dtype=complex)
    big = np.abs(xi) >= 0.5
    out[big] = 1.0 / (1j * xi[big])
    t = xi[~big]
    out[~big] = -1j * (8.0 * t - 16.0 * t**3)
    return out


@dataclass
class Step2Result:
    phi: np.ndarray
    d: DiscreteSymbol
    forward: Callable | None
    inverse: Callable | None
    operator: MatrixOperator | None


def step2_offdiag(b1, a2, cutoff: CutoffProfile | None = None, margin: float = 0.0) -> Step2Result:
    b1 = np.asarray(b1, dtype=complex)
    p = 1.0 + np.asarray(a2).real
    n = b1.size
    if np.min(p) <= margin:
        i = int(np.argmin(p))
        raise EllipticityError("1 + a2 is not positive", min_1_plus_a2=float(p[i]), argmin_x=float(2 * np.pi * i / n))
    phi = b1 / (2.0 * p)
    grid = PeriodicGrid(n)
    gam = XiProfile.from_table(gamma_profile(n))
    d = DiscreteSymbol(grid, [SymbolTerm(SpectralField.from_samples(phi, grid), gam)], order=-1)
    fwd = inv = op = None
    if cutoff is not None and np.max(np.abs(phi)) > 1e-15:
        op = MatrixOperator(MatrixSymbol(DiscreteSymbol.zero(grid), d), cutoff)
        fwd = lambda W, op=op: W + op(W)
        inv = lambda W, op=op: W - op(W)
    return Step2Result(phi, d, fwd, inv, op)


def step2_cancellation_residual(b1, a2, d: DiscreteSymbol) -> float:
    """max over |xi| >= 1/2 of |b1 (i xi) - 2 d (1 + a2)(i xi)^2|."""
    n = d.n
    xi = xi_grid(n)
    xi = xi[np.abs(xi) >= 0.5]
    dv = d.evaluate(xi)
    p = 1.0 + np.asarray(a2).real
    r = np.asarray(b1)[:, None] * (1j * xi)[None, :] - 2.0 * dv * p[:, None] * (1j * xi)[None, :] ** 2
    return float(np.max(np.abs(r)))


# ---------------------------------------------------------------------------
# stage 3


@dataclass
class DiffeoResult:
    m2: float
    gamma: SpectralField
    beta: SpectralField
    newton_residual: float
    newton_iterations: int
    min_one_plus_beta_x: float
    identity_residual: float
    gamma_mean: float


def step3_build_diffeo(a2, margin: float = 0.0, tol: float = NEWTON_TOL, maxit: int = NEWTON_MAXIT) -> DiffeoResult:
    a2 = np.asarray(a2).real
    n = a2.size
    grid = PeriodicGrid(n)
    one = 1.0 + a2
    if np.min(one) <= margin:
        i = int(np.argmin(one))
        raise EllipticityError("1 + a2 is not positive", min_1_plus_a2=float(one[i]), argmin_x=float(2 * np.pi * i / n))
    m2 = 1.0 / np.mean(one**-0.5) ** 2 - 1.0
    g = np.sqrt((1.0 + m2) / one) - 1.0
    gc = to_coeffs(g)
    gamma_mean = abs(gc[n // 2])
    gc[n // 2] = 0.0
    gamma_c = antiderivative_coeffs(gc)
    gamma = SpectralField(grid, gamma_c)
    x = grid.nodes
    y = x.copy()
    it = 0
    for it in range(1, maxit + 1):
        G = trig_eval(gamma_c, y).real
        Gp = trig_eval(gamma_c, y, 1).real
        F = y + G - x
        y = y - F / (1.0 + Gp)
        if np.max(np.abs(F)) < tol:
            break
    beta_s = y - x
    res = float(np.max(np.abs(beta_s + trig_eval(gamma_c, x + beta_s).real)))
    if res > max(tol * 10, 1e-10):
        raise ConvergenceError("Newton inversion of the diffeomorphism failed", worst_residual=res, iterations=it)
    beta = SpectralField.from_samples(beta_s.astype(complex), grid)
    bx = d_samples(beta_s, 1).real
    gy = to_samples(gamma_c * (1j * np.where(np.arange(n) == 0, 0, np.arange(n) - n // 2))).real
    ident = (1.0 + a2) * (1.0 + gy) ** 2
    ident_res = float(np.max(np.abs(ident / (1.0 + m2) - 1.0)))
    return DiffeoResult(float(m2), gamma, beta, res, it, float(np.min(1.0 + bx)), ident_res, float(gamma_mean))


class Paracomposition:
    """Time-one map of d/dtau W = Op^BW(b(tau, x) i xi) W, b = beta/(1 + tau beta_x)."""

    def __init__(self, beta: SpectralField, cutoff: CutoffProfile, n_tau: int = TAU_START):
        self.beta = beta
        self.cutoff = cutoff
        self.n = beta.n
        bs = beta.samples.real
        self._bs = bs
        self._bx = d_samples(bs, 1).real
        lo = float(np.min(np.minimum(1.0, 1.0 + self._bx)))
        if lo <= 0:
            raise ParameterError("1 + tau beta_x must stay positive on [0, 1]", min_value=lo)
        self._ops: dict = {}
        self.n_tau = 0
        self.set_steps(n_tau)

    def _op(self, tau: float) -> BWOperator:
        key = round(tau, 15)
        if key not in self._ops:
            b = self._bs / (1.0 + tau * self._bx)
            sym = DiscreteSymbol.from_monomials({1: b.astype(complex)}, self.beta.grid)
            self._ops[key] = BWOperator(sym, self.cutoff)
        return self._ops[key]

    def set_steps(self, n_tau: int):
        self.n_tau = int(n_tau)
        for i in range(2 * self.n_tau + 1):
            self._op(i / (2.0 * self.n_tau))

    def _rk4(self, W, n_tau: int, backward: bool) -> np.ndarray:
        h = 1.0 / n_tau
        W = np.array(W, dtype=complex)
        steps = range(n_tau - 1, -1, -1) if backward else range(n_tau)
        sgn = -1.0 if backward else 1.0
        for i in steps:
            t0 = (i + 1) * h if backward else i * h
            tm = t0 + sgn * h / 2
            t1 = t0 + sgn * h
            G0, Gm, G1 = self._op(t0), self._op(tm), self._op(t1)
            k1 = G0(W)
            k2 = Gm(W + (sgn * h / 2) * k1)
            k3 = Gm(W + (sgn * h / 2) * k2)
            k4 = G1(W + sgn * h * k3)
            W = W + (sgn * h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return W

    def forward(self, W, n_tau: int | None = None) -> np.ndarray:
        return self._rk4(W, n_tau or self.n_tau, False)

    def matrix(self, backward: bool = False) -> np.ndarray:
        """Dense n x n matrix of the RK4 map, built by stepping matrices."""
        n, N = self.n, self.n_tau
        h = 1.0 / N
        eye = np.eye(n, dtype=complex)
        dense = {}

        def G(t):
            key = round(t, 15)
            if key not in dense:
                dense[key] = self._op(t).dense
            return dense[key]

        W = eye
        steps = range(N - 1, -1, -1) if backward else range(N)
        sgn = -1.0 if backward else 1.0
        for i in steps:
            t0 = (i + 1) * h if backward else i * h
            G0, Gm, G1 = G(t0), G(t0 + sgn * h / 2), G(t0 + sgn * h)
            k1 = G0
            k2 = Gm + (sgn * h / 2) * (Gm @ k1)
            k3 = Gm + (sgn * h / 2) * (Gm @ k2)
            k4 = G1 + sgn * h * (G1 @ k3)
            W = (eye + (sgn * h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)) @ W
        return W

    def inverse(self, W, n_tau: int | None = None) -> np.ndarray:
        return self._rk4(W, n_tau or self.n_tau, True)

    def choose_steps(self, W, start: int = TAU_START, tol: float = TAU_TOL, max_steps: int = TAU_MAX) -> int:
        """Double the step count until the result moves by less than tol (relative)."""
        N = start
        scale = max(_norm(W), 1e-300)
        prev = self.forward(W, N)
        while N < max_steps:
            nxt = self.forward(W, 2 * N)
            change = _norm(nxt - prev) / scale
            N *= 2
            if change < tol:
                break
            prev = nxt
        else:
            raise ConvergenceError("tau refinement did not converge", n_tau=N, last_change=change)
        self.set_steps(N)
        return N


def step3_paracomposition(beta: SpectralField, state, n_tau: int = TAU_START, cutoff: CutoffProfile | None = None,
                          inverse: bool = False) -> DoubledState:
    cutoff = cutoff or CutoffProfile()
    X = state.array if isinstance(state, DoubledState) else np.asarray(state)
    P = Paracomposition(beta, cutoff, n_tau)
    out = P.inverse(X) if inverse else P.forward(X)
    return DoubledState.from_array(out) if isinstance(state, DoubledState) else out


def half_density_composition(beta: SpectralField, u: SpectralField) -> SpectralField:
    """sqrt(1 + beta_x) u(x + beta(x)) by trigonometric interpolation."""
    bs = beta.samples.real
    x = beta.grid.nodes
    vals = np.sqrt(1.0 + d_samples(bs, 1).real) * trig_eval(u.coeffs, x + bs)
    return SpectralField.from_samples(vals, u.grid)


# ---------------------------------------------------------------------------
# stage 4


@dataclass
class Step4Result:
    m1: complex
    s: SpectralField
    forward: MatrixOperator | None
    inverse: MatrixOperator | None


def step4_flatten(a1, m2: float, cutoff: CutoffProfile | None = None) -> Step4Result:
    a1 = np.asarray(a1, dtype=complex)
    n = a1.size
    if 1.0 + m2 <= 0:
        raise ParameterError("1 + m2 must be positive", m2=m2)
    grid = PeriodicGrid(n)
    m1 = complex(np.mean(a1))
    rhs = to_coeffs((-a1 + m1) / (2.0 * (1.0 + m2)))
    rhs[n // 2] = 0.0
    s = SpectralField(grid, antiderivative_coeffs(rhs))
    fwd = inv = None
    if cutoff is not None and np.max(np.abs(s.coeffs)) > 1e-15:
        ss = s.samples
        fwd = MatrixOperator(MatrixSymbol(_func_symbol(grid, np.exp(-ss)), DiscreteSymbol.zero(grid)), cutoff)
        inv = MatrixOperator(MatrixSymbol(_func_symbol(grid, np.exp(ss)), DiscreteSymbol.zero(grid)), cutoff)
    return Step4Result(m1, s, fwd, inv)


# ---------------------------------------------------------------------------
# reduced symbol and generators


def reduced_symbol(m2: float, m1: complex, grid) -> MatrixSymbol:
    grid = grid if isinstance(grid, PeriodicGrid) else PeriodicGrid(int(grid))
    m = DiscreteSymbol.from_monomials({2: complex(m2), 1: complex(m1)}, grid)
    return MatrixSymbol(m, DiscreteSymbol.zero(grid))


def generator_multipliers(n: int, m2: float, m1: complex, potential: PotentialSpec | None = None) -> np.ndarray:
    """Per-mode multipliers of iE(Lambda + Op(L)), shape (2, n)."""
    lam, lam_r = lambda_multipliers(n, potential)
    k = xi_effective(n)
    m_plus = -m2 * k**2 + m1 * 1j * k
    m_minus = np.conj(-m2 * k**2 - m1 * 1j * k)  # conj m(-k)
    return np.stack([1j * (lam + m_plus), -1j * (lam_r + m_minus)])


def full_generator(system: ParalinearizedSystem) -> Callable:
    """X -> iE(Lambda X + Op^BW(A) X)."""
    lam, lam_r = lambda_multipliers(system.n, system.potential)
    op = system.operator()
    LAM = np.stack([lam, lam_r])

    def M(X):
        X = np.array(X, dtype=complex)
        X[..., 0] = 0.0  # Nyquist mode is outside the evolved space
        Y = LAM * X + op(X)
        Y[..., 0] = 0.0
        return 1j * _E[:, None] * Y

    return M


# ---------------------------------------------------------------------------
# bundle


@dataclass
class Stage:
    name: str
    forward: Callable
    inverse: Callable

    def matrices(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Dense (2n x 2n) forward and inverse matrices."""
        if isinstance(self.forward, MatrixOperator):
            return self.forward.dense, self.inverse.dense
        owner = getattr(self.forward, "__self__", None)
        if isinstance(owner, Paracomposition):
            z = np.zeros((n, n), complex)
            f, b = owner.matrix(False), owner.matrix(True)
            return np.block([[f, z], [z, f]]), np.block([[b, z], [z, b]])
        eye = np.eye(2 * n, dtype=complex).reshape(2 * n, 2, n)
        return (self.forward(eye).reshape(2 * n, 2 * n).T, self.inverse(eye).reshape(2 * n, 2 * n).T)


class DenseBundle:
    """Reduction bundle with forward and approximate inverse stored as matrices."""

    def __init__(self, bundle: "ReductionBundle"):
        n = bundle.n
        self.n = n
        self._mult = bundle.multipliers()
        self._identity = bundle.is_identity()
        F = np.eye(2 * n, dtype=complex)
        P = np.eye(2 * n, dtype=complex)
        for st in bundle.stages:
            f, b = st.matrices(n)
            F = f @ F
            P = P @ b
        self.F, self.P = F, P

    def multipliers(self) -> np.ndarray:
        return self._mult

    def is_identity(self) -> bool:
        return self._identity

    def _apply(self, Mx, W):
        W = np.asarray(W, dtype=complex)
        lead = W.shape[:-2]
        out = W.reshape(-1, 2 * self.n) @ Mx.T
        return out.reshape(lead + (2, self.n))

    def forward(self, W) -> np.ndarray:
        return self._apply(self.F, W)

    def inverse_approx(self, W) -> np.ndarray:
        return self._apply(self.P, W)


@dataclass
class ReductionBundle:
    n: int
    stages: list
    m2: float
    m1: complex
    potential: PotentialSpec
    beta: SpectralField
    gamma: SpectralField
    z: SpectralField
    d: DiscreteSymbol
    s: SpectralField
    paracomposition: Paracomposition | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def reduced_m2(self) -> float:
        return self.m2

    @property
    def reduced_m1(self) -> complex:
        return self.m1

    @property
    def L(self) -> MatrixSymbol:
        return reduced_symbol(self.m2, self.m1, self.n)

    def multipliers(self) -> np.ndarray:
        return generator_multipliers(self.n, self.m2, self.m1, self.potential)

    def is_identity(self) -> bool:
        return not self.stages

    def forward(self, W) -> np.ndarray:
        W = np.asarray(W, dtype=complex)
        for st in self.stages:
            W = st.forward(W)
        return W

    def inverse_approx(self, W) -> np.ndarray:
        W = np.asarray(W, dtype=complex)
        for st in reversed(self.stages):
            W = st.inverse(W)
        return W

    def inverse(self, W, tol: float = 1e-13, maxit: int = 60) -> np.ndarray:
        """Exact inverse by the preconditioned sweep V <- V + Psi(W - Phi V)."""
        W = np.asarray(W, dtype=complex)
        if not self.stages:
            return W.copy()
        V = self.inverse_approx(W)
        scale = max(_norm(W), 1e-300)
        last = np.inf
        for _ in range(maxit):
            r = W - self.forward(V)
            last = _norm(r) / scale
            if last < tol:
                return V
            V = V + self.inverse_approx(r)
        if last < 1e-9:
            return V
        raise ConvergenceError("inverse sweep did not converge", last_relative_residual=last)

    def dense(self) -> DenseBundle:
        return DenseBundle(self)

    def summary(self) -> dict:
        return {
            "m2": self.m2,
            "m1": [self.m1.real, self.m1.imag],
            "stages": [st.name for st in self.stages],
            "diagnostics": self.diagnostics,
        }


def reduce_full(system: ParalinearizedSystem, check: bool = True, skip_step3: bool = False,
                n_tau: int | None = None, c1: float = 1e-3, c2: float = 1e-3) -> ReductionBundle:
    n = system.n
    grid = PeriodicGrid(n)
    cutoff = system.cutoff
    U = system.state
    margins = {}
    if check:
        for rep in structural_gate(system.spec, system.potential, U, c1, c2):
            margins.update({k: v for k, v in rep.details.items() if k.startswith("min")})
    f = A_fields(system.A)
    diag: dict = {"margins": margins}
    stages: list = []

    st1 = step1_diagonalize(f["a2"], f["b2"], cutoff)
    diag["step1_residual"] = st1.residual
    diag["det_exp_z_residual"] = st1.det_residual
    if st1.forward is not None:
        stages.append(Stage("diagonalize", st1.forward, st1.inverse))
    if st1.forward is None:
        a1, b1 = f["a1"], f["b1"]
    else:
        a1, b1 = first_order_after_step1(f, st1)
    a2 = st1.a2_new

    st2 = step2_offdiag(b1, a2, cutoff)
    if st2.forward is not None:
        stages.append(Stage("offdiag", st2.forward, st2.inverse))
        diag["step2_cancellation_residual"] = step2_cancellation_residual(b1, a2, st2.d)

    dif = step3_build_diffeo(a2)
    diag["newton_residual"] = dif.newton_residual
    diag["diffeo_identity_residual"] = dif.identity_residual
    diag["gamma_mean"] = dif.gamma_mean
    diag["min_one_plus_beta_x"] = dif.min_one_plus_beta_x
    beta = dif.beta
    para = None
    if skip_step3:
        beta = SpectralField.zeros(grid)
        a1_3 = a1
        diag["step3"] = "skipped"
    else:
        bnorm = float(np.max(np.abs(beta.samples)))
        if bnorm > 1e-15:
            para = Paracomposition(beta, cutoff, n_tau or TAU_START)
            if n_tau is None:
                para.choose_steps(U)
            diag["n_tau"] = para.n_tau
            stages.append(Stage("paracomposition", para.forward, para.inverse))
            y = grid.nodes + beta.samples.real
            gy = trig_eval(dif.gamma.coeffs, y, 1).real
            a1_3 = trig_eval(to_coeffs(a1), y) * (1.0 + gy)
        else:
            a1_3 = a1

    st4 = step4_flatten(a1_3, dif.m2, cutoff)
    if st4.forward is not None:
        stages.append(Stage("flatten", st4.forward, st4.inverse))

    z = SpectralField.from_samples(st1.z.astype(complex), grid)
    bundle = ReductionBundle(n, stages, dif.m2, st4.m1, system.potential, beta, dif.gamma, z, st2.d, st4.s, para, diag)
    if stages:
        probe = U if _norm(U) > 0 else np.ones((2, n), complex)
        diag["approx_inverse_defect"] = _norm(bundle.inverse_approx(bundle.forward(probe)) - probe) / _norm(probe)
    return bundle


# ---------------------------------------------------------------------------
# conjugation residual


def probe_state(n: int, k: int) -> np.ndarray:
    """Normalized paired probe (e^{ikx}, e^{-ikx}) in coefficients."""
    X = np.zeros((2, n), dtype=complex)
    X[0, k + n // 2] = 1.0
    X[1, -k + n // 2] = 1.0
    return X / math.sqrt(2.0)


def conjugation_residual(system: ParalinearizedSystem, bundle: ReductionBundle, probes: Sequence[int] = (8, 16, 32, 64)) -> dict:
    """||Phi M Phi^{-1} X - L X|| / k^2 for paired single-mode probes."""
    n = system.n
    M = full_generator(system)
    mult = bundle.multipliers()
    table = []
    for k in probes:
        if not 0 < k < n // 2:
            raise ParameterError("probe mode must lie in (0, n/2)", k=k, n=n)
        X = probe_state(n, k)
        res = bundle.forward(M(bundle.inverse(X))) - mult * X
        table.append([int(k), _norm(res) / (k * k)])
    return {"residual_table": table, "relative": [v for _, v in table]}
