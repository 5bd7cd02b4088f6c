"""Named invariant checks across all modules, run by ``paradiff verify``.

Each check returns an :class:`InvariantResult` with the measured value and the
tolerance it is held to. The whole suite runs at n = 128 in well under a minute.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .nonlinear import (
    A_fields,
    build_A,
    nonlinearity,
    preset,
    remainder,
    sample_states,
)
from .quantizer import (
    BWOperator,
    MatrixOperator,
    composition_residual,
    matrix_self_adjoint_residual,
    reality_violation,
    self_adjoint_residual,
)
from .reducer import (
    generator_multipliers,
    reduce_full,
    step1_diagonalize,
    step3_build_diffeo,
    step4_flatten,
)
from .nonlinear import ParalinearizedSystem
from .solver import SolverConfig, constant_flow, hamiltonian_energy, iterate_quasilinear, solve_frozen_linear
from .spectral import (
    DoubledState,
    PeriodicGrid,
    PotentialSpec,
    SpectralField,
    antiderivative_zero_mean,
    apply_lambda,
    hs_norm,
    sobolev_norm,
    spectral_derivative,
    subspace_violation,
    to_coeffs,
    to_samples,
    xi_effective,
)
from .symbols import (
    DiscreteSymbol,
    MatrixSymbol,
    chi_table,
    make_cutoff,
    matrix_values_2x2,
    regularize,
    sharp_product,
    sharp_term,
    symbol_exp,
    xi_grid,
)


@dataclass
class InvariantResult:
    module: str
    name: str
    ok: bool
    value: float
    tol: float
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {"module": self.module, "name": self.name, "ok": self.ok, "value": self.value, "tol": self.tol,
                "seconds": self.seconds}


_REGISTRY: list[tuple[str, str, Callable]] = []


def invariant(module: str, name: str):
    def deco(fn):
        _REGISTRY.append((module, name, fn))
        return fn

    return deco


def _rng(seed):
    return np.random.default_rng(seed)


def _smooth_field(grid, rng, width: int = 6, real: bool = False) -> SpectralField:
    n = grid.n
    c = np.zeros(n, dtype=complex)
    j = np.arange(-width, width + 1)
    c[j + n // 2] = (rng.normal(size=j.size) + 1j * rng.normal(size=j.size)) / (1.0 + j**2)
    f = SpectralField(grid, c)
    if real:
        f = SpectralField.from_samples(f.samples.real.astype(complex), grid)
    return f


def _le(value, tol):
    return bool(value < tol), float(value), float(tol)


# ---------------------------------------------------------------------------
# torus-spectral


@invariant("spectral", "parseval")
def _parseval(n, rng):
    g = PeriodicGrid(n)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    c = to_coeffs(v)
    lhs = np.sum(np.abs(c) ** 2)
    rhs = 2 * np.pi * np.mean(np.abs(v) ** 2)
    return _le(abs(lhs - rhs) / rhs, 1e-12)


@invariant("spectral", "sobolev_monotone_and_l2")
def _sobolev(n, rng):
    g = PeriodicGrid(n)
    u = SpectralField.from_samples(rng.normal(size=n) + 0j, g)
    norms = [sobolev_norm(u, s) for s in (0, 0.5, 1, 2, 3)]
    mono = all(b >= a for a, b in zip(norms, norms[1:]))
    err = abs(norms[0] - np.linalg.norm(u.coeffs))
    return mono and err < 1e-12, err, 1e-12


@invariant("spectral", "lambda_keeps_reality")
def _lambda_reality(n, rng):
    g = PeriodicGrid(n)
    pot = PotentialSpec({1: 0.7, -1: 0.7, 3: -0.2, -3: -0.2})
    U = DoubledState.from_scalar(_smooth_field(g, rng))
    out = apply_lambda(U, pot).array
    return _le(subspace_violation(out, "reality"), 1e-12)


@invariant("spectral", "antiderivative_two_sided_inverse")
def _antider(n, rng):
    g = PeriodicGrid(n)
    u = _smooth_field(g, rng)
    c = u.coeffs.copy()
    c[n // 2] = 0.0
    u = SpectralField(g, c)
    e1 = np.max(np.abs(spectral_derivative(antiderivative_zero_mean(u), 1).coeffs - u.coeffs))
    e2 = np.max(np.abs(antiderivative_zero_mean(spectral_derivative(u, 1)).coeffs - u.coeffs))
    return _le(max(e1, e2), 1e-12)


# ---------------------------------------------------------------------------
# symbol-algebra


def _order1_symbol(g, rng):
    return DiscreteSymbol.from_monomials({1: _smooth_field(g, rng, 4), 0: _smooth_field(g, rng, 4)}, g)


@invariant("symbols", "regularize_idempotent_off_transition")
def _regularize(n, rng):
    g = PeriodicGrid(n)
    cut = make_cutoff(0.5)
    a = _order1_symbol(g, rng)
    r1 = regularize(a, cut)
    r2 = regularize(r1, cut)
    xi = xi_grid(n)
    D = to_coeffs(np.moveaxis((r2 - r1).evaluate(xi), 1, 0))  # (xi, m)
    m = np.arange(n) - n // 2
    chi = cut(m[None, :], xi[:, None])
    mask = (chi == 0.0) | (chi == 1.0)
    return _le(float(np.max(np.abs(D[mask]))), 1e-12)


@invariant("symbols", "sharp_with_constant_is_scaling")
def _sharp_const(n, rng):
    g = PeriodicGrid(n)
    b = _order1_symbol(g, rng)
    c = DiscreteSymbol.constant(g, 2.5 - 0.5j)
    xi = np.linspace(-10, 10, 9)
    worst = 0.0
    for rho in (1, 2, 3):
        ref = b.scale(2.5 - 0.5j).evaluate(xi)
        worst = max(worst, np.max(np.abs(sharp_product(c, b, rho).evaluate(xi) - ref)),
                    np.max(np.abs(sharp_product(b, c, rho).evaluate(xi) - ref)))
    return _le(worst, 1e-12)


@invariant("symbols", "symbol_exp_inverse")
def _exp_inverse(n, rng):
    g = PeriodicGrid(n)
    z = _smooth_field(g, rng)
    zero = DiscreteSymbol.zero(g)
    Z = DiscreteSymbol.from_monomials({0: z}, g)
    P = matrix_values_2x2(symbol_exp(MatrixSymbol(zero, Z)))
    Q = matrix_values_2x2(symbol_exp(MatrixSymbol(zero, Z.scale(-1.0))))
    s = DiscreteSymbol.from_monomials({0: z}, g)
    Pd = matrix_values_2x2(symbol_exp(MatrixSymbol(s, zero)))
    Qd = matrix_values_2x2(symbol_exp(MatrixSymbol(s.scale(-1.0), zero)))
    err = max(np.max(np.abs(P @ Q - np.eye(2))), np.max(np.abs(Pd @ Qd - np.eye(2))))
    return _le(err, 1e-12)


@invariant("symbols", "first_sharp_term_antisymmetric")
def _antisym(n, rng):
    g = PeriodicGrid(n)
    a, b = _order1_symbol(g, rng), _order1_symbol(g, rng)
    xi = np.linspace(-8, 8, 7)
    err = np.max(np.abs((sharp_term(a, b, 1) + sharp_term(b, a, 1)).evaluate(xi)))
    return _le(err, 1e-12)


# ---------------------------------------------------------------------------
# quantizer


@invariant("quantizer", "x_independent_symbol_is_multiplier")
def _multiplier(n, rng):
    g = PeriodicGrid(n)
    xi = xi_grid(n)
    tab = 1.0 + 0.3 * xi**2 - 0.1j * xi
    sym = DiscreteSymbol.multiplier(g, tab)
    c = rng.normal(size=n) + 1j * rng.normal(size=n)
    out = BWOperator(sym, make_cutoff(0.5))(c)
    k = np.arange(n) - n // 2
    exact = (1.0 + 0.3 * k**2 - 0.1j * k) * c
    return _le(np.max(np.abs(out - exact)), 1e-12)


@invariant("quantizer", "composition_nonincreasing_in_rho")
def _composition(n, rng):
    g = PeriodicGrid(n)
    cut = make_cutoff(0.5)
    # keep the product bandwidth inside the cutoff core at the n/4 probe
    w = max(1, min(3, n // 40))
    a = DiscreteSymbol.from_monomials({1: _smooth_field(g, rng, w)}, g)
    b = DiscreteSymbol.from_monomials({1: _smooth_field(g, rng, w)}, g)
    r = [composition_residual(a, b, cut, rho) for rho in (1, 2, 3)]
    ok = r[1] <= r[0] and r[2] <= r[1]
    return ok, r[2] / r[0], 1.0


@invariant("quantizer", "self_adjointness_criterion")
def _selfadj(n, rng):
    g = PeriodicGrid(n)
    cut = make_cutoff(0.5)
    a = DiscreteSymbol.from_monomials({2: _smooth_field(g, rng, real=True), 0: _smooth_field(g, rng, real=True)}, g)
    b = DiscreteSymbol.from_monomials({2: _smooth_field(g, rng), 0: _smooth_field(g, rng)}, g)
    r = max(self_adjoint_residual(a, cut), matrix_self_adjoint_residual(MatrixSymbol(a, b), cut))
    return _le(r, 1e-10)


@invariant("quantizer", "parity_preserved")
def _parity_op(n, rng):
    U = sample_states(n, 1, 0.3, even=True, seed=int(rng.integers(1 << 30)))[0]
    A = build_A(preset("manuela1"), U)
    V = sample_states(n, 1, 0.5, even=True, seed=int(rng.integers(1 << 30)))[0]
    out = MatrixOperator(A, make_cutoff(0.5))(V)
    return _le(subspace_violation(out, "parity"), 1e-12)


# ---------------------------------------------------------------------------
# paralinearizer


@invariant("nonlinear", "remainder_reconstructs_F")
def _remainder(n, rng):
    cut = make_cutoff(0.5)
    worst = 0.0
    for name in ("manuela", "manuela1", "christ"):
        spec = preset(name)
        for U in sample_states(n, 2, 0.3, seed=int(rng.integers(1 << 30))):
            F = nonlinearity(spec, U)
            R = remainder(spec, U, cut)
            rec = R + MatrixOperator(build_A(spec, U), cut)(U)
            worst = max(worst, np.max(np.abs(rec - F)) / max(1.0, np.max(np.abs(F))))
    return _le(worst, 1e-12)


@invariant("nonlinear", "hamiltonian_A_self_adjoint")
def _ham_A(n, rng):
    cut = make_cutoff(0.5)
    worst = 0.0
    for U in sample_states(n, 2, 0.3, seed=int(rng.integers(1 << 30))):
        worst = max(worst, matrix_self_adjoint_residual(build_A(preset("manuela"), U), cut))
    return _le(worst, 1e-8)


@invariant("nonlinear", "parity_fields_even_odd")
def _parity_fields(n, rng):
    worst = 0.0
    r = (-np.arange(n)) % n
    for U in sample_states(n, 2, 0.3, even=True, seed=int(rng.integers(1 << 30))):
        f = A_fields(build_A(preset("manuela1"), U))
        for key in ("a2", "b2", "a0", "b0"):
            worst = max(worst, np.max(np.abs(f[key] - f[key][r])))
        for key in ("a1", "b1"):
            worst = max(worst, np.max(np.abs(f[key] + f[key][r])))
    return _le(worst, 1e-10)


@invariant("nonlinear", "operator_reality_preserving")
def _reality_A(n, rng):
    cut = make_cutoff(0.5)
    worst = 0.0
    for name in ("manuela", "manuela1", "christ"):
        for U in sample_states(n, 1, 0.3, seed=int(rng.integers(1 << 30))):
            V = sample_states(n, 1, 1.0, seed=int(rng.integers(1 << 30)))[0]
            worst = max(worst, reality_violation(MatrixOperator(build_A(preset(name), U), cut)(V)))
    return _le(worst, 1e-12)


# ---------------------------------------------------------------------------
# reducer


@invariant("reducer", "step1_diagonal_and_unimodular")
def _step1(n, rng):
    g = PeriodicGrid(n)
    a2 = 0.4 * _smooth_field(g, rng, real=True).samples.real
    a2 = a2 / max(1.0, 2 * np.max(np.abs(a2)))
    b2 = 0.2 * _smooth_field(g, rng).samples
    st = step1_diagonalize(a2, b2, None)
    return _le(max(st.residual, st.det_residual), 1e-12)


@invariant("reducer", "step3_identities")
def _step3(n, rng):
    g = PeriodicGrid(n)
    a2 = 0.2 * np.cos(g.nodes)
    d = step3_build_diffeo(a2)
    st4 = step4_flatten(0.3j * np.sin(g.nodes) + 0.1j, d.m2, make_cutoff(0.5))
    s_mean = abs(st4.s.coeff(0)) if st4.s is not None else 0.0
    worst = max(d.identity_residual / 1e-10, d.newton_residual / 1e-8, d.gamma_mean / 1e-12, s_mean / 1e-12)
    return worst < 1.0, worst, 1.0


@invariant("reducer", "parity_stages_keep_even_states")
def _reducer_parity(n, rng):
    U = sample_states(n, 1, 0.3, even=True, seed=int(rng.integers(1 << 30)))[0]
    sysm = ParalinearizedSystem(preset("manuela1"), PotentialSpec(), make_cutoff(0.5), U)
    bundle = reduce_full(sysm, n_tau=16)
    V = sample_states(n, 1, 1.0, even=True, seed=int(rng.integers(1 << 30)))[0]
    out = bundle.forward(V)
    back = bundle.inverse_approx(V)
    return _le(max(subspace_violation(out, "parity"), subspace_violation(back, "parity")), 1e-10)


@invariant("reducer", "hamiltonian_reduced_symbol_real")
def _m_real(n, rng):
    U = sample_states(n, 1, 0.2, seed=int(rng.integers(1 << 30)))[0]
    sysm = ParalinearizedSystem(preset("manuela"), PotentialSpec(), make_cutoff(0.5), U)
    bundle = reduce_full(sysm, n_tau=16)
    k = xi_effective(n)
    m = -bundle.m2 * k**2 + bundle.m1 * 1j * k
    return _le(float(np.max(np.abs(np.imag(m)))), 1e-10)


# ---------------------------------------------------------------------------
# solver


@invariant("solver", "constant_flow_isometry_and_reality")
def _flow(n, rng):
    g = PeriodicGrid(n)
    pot = PotentialSpec({1: 0.5, -1: 0.5})
    U = DoubledState.from_scalar(_smooth_field(g, rng)).array
    out = constant_flow((0.3, 0.0), pot, U, 0.7)
    out = out.array if isinstance(out, DoubledState) else out
    err = abs(hs_norm(out[0], 3) - hs_norm(U[0], 3)) / hs_norm(U[0], 3)
    return _le(max(err, subspace_violation(out, "reality")), 1e-12)


def _short_cfg(n):
    return SolverConfig(n=n, T=0.004, dt=5e-4, check=False)


@invariant("solver", "frozen_linear_deterministic")
def _determinism(n, rng):
    cfg = _short_cfg(n)
    U0 = sample_states(n, 1, 0.2, even=True, seed=int(rng.integers(1 << 30)))[0]
    prev = np.array([U0] * len(cfg.time_grid()))
    a = solve_frozen_linear(preset("manuela1"), None, prev, U0, cfg, n_tau=16).states
    b = solve_frozen_linear(preset("manuela1"), None, prev, U0, cfg, n_tau=16).states
    same = a.tobytes() == b.tobytes()
    return same, float(np.max(np.abs(a - b))), 0.0 + 1e-300


@invariant("solver", "energy_drift")
def _energy(n, rng):
    g = PeriodicGrid(n)
    u = 0.1 * np.exp(1j * g.nodes) + 0.05 * np.exp(-2j * g.nodes)
    U0 = DoubledState.from_scalar(SpectralField.from_samples(u, g)).array
    spec = preset("manuela")
    traj, _ = iterate_quasilinear(spec, None, U0, SolverConfig(n=n, T=0.004, dt=5e-4))
    E = np.array([hamiltonian_energy(spec, None, U) for U in traj.states])
    return _le(float(np.max(np.abs(E - E[0])) / abs(E[0])), 1e-5)


@invariant("solver", "parity_trajectory")
def _parity_traj(n, rng):
    g = PeriodicGrid(n)
    U0 = DoubledState.from_scalar(SpectralField.from_samples(0.3 * np.cos(g.nodes) + 0j, g)).array
    traj, _ = iterate_quasilinear(preset("manuela1"), None, U0, SolverConfig(n=n, T=0.004, dt=5e-4))
    v = max(np.max(traj.violations("parity")), np.max(traj.violations("reality")))
    return _le(float(v), 1e-9)


@invariant("solver", "growth_constant_grid_stable")
def _growth_constant(n, rng):
    Cs = []
    for m in (n // 2, n):
        g = PeriodicGrid(m)
        U0 = DoubledState.from_scalar(SpectralField.from_samples(0.3 * np.cos(g.nodes) + 0j, g)).array
        traj, _ = iterate_quasilinear(preset("manuela1"), None, U0, SolverConfig(n=m, T=0.004, dt=5e-4))
        h = traj.hs_norms(4.0)
        Cs.append(float(np.max(h) / h[0]))
    return _le(abs(Cs[1] - Cs[0]) / Cs[1], 1e-6)


# ---------------------------------------------------------------------------


def names() -> list[str]:
    return [f"{m}.{n}" for m, n, _ in _REGISTRY]


def run_suite(n: int = 128, seed: int = 0, only: str | None = None) -> list[InvariantResult]:
    rng = _rng(seed)
    out = []
    for module, name, fn in _REGISTRY:
        if only is not None and only not in (module, f"{module}.{name}"):
            continue
        t0 = time.perf_counter()
        ok, value, tol = fn(n, rng)
        out.append(InvariantResult(module, name, bool(ok), float(value), float(tol), time.perf_counter() - t0))
    return out
