"""Linear flows, the frozen-coefficient Duhamel solve, the quasilinear iterative
scheme, an independent reference integrator and conservation diagnostics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import CapabilityError, ConvergenceError, DivergenceError, ParameterError
from .nonlinear import (
    NonlinearitySpec,
    ParalinearizedSystem,
    build_A,
    nonlinearity,
    poly_eval,
    state_variables,
    structural_gate,
)
from .quantizer import MatrixOperator
from .reducer import ReductionBundle, full_generator, generator_multipliers, reduce_full
from .spectral import (
    DoubledState,
    PotentialSpec,
    conj_reflect,
    d_coeffs,
    hs_norm,
    lambda_multipliers,
    subspace_violation,
    to_coeffs,
    to_samples,
)
from .symbols import CutoffProfile, MatrixSymbol, make_cutoff

log = logging.getLogger(__name__)

_E = np.array([1.0, -1.0])[:, None]


def band_mask(n: int, fraction: float = 2.0 / 3.0) -> np.ndarray:
    k = np.abs(np.arange(n) - n // 2)
    return (k <= int(fraction * n / 2)) & (np.arange(n) != 0)


@dataclass(frozen=True)
class SolverConfig:
    n: int = 256
    s: float = 4.0
    T: float = 0.05
    dt: float = 1e-4
    tol: float = 1e-8
    max_iter: int = 20
    delta: float = 0.5
    rho: int = 2
    duhamel_tol: float = 1e-12
    duhamel_maxit: int = 40
    max_halvings: int = 4
    check: bool = True
    band_fraction: float = 2.0 / 3.0
    refresh_every: int = 1

    def __post_init__(self):
        if not (self.T > 0 and self.dt > 0 and self.tol > 0):
            raise ParameterError("T, dt and tol must be positive", T=self.T, dt=self.dt, tol=self.tol)
        if self.s < 2:
            raise ParameterError("Sobolev index s must be at least 2", s=self.s)

    @property
    def cutoff(self) -> CutoffProfile:
        return make_cutoff(self.delta)

    def band_mask(self, n: int | None = None) -> np.ndarray:
        """Modes |k| <= band_fraction * n/2 evolved by the nonlinear solver."""
        return band_mask(n or self.n, self.band_fraction)

    def time_grid(self, T: float | None = None) -> np.ndarray:
        T = self.T if T is None else T
        steps = max(1, int(round(T / self.dt)))
        return np.linspace(0.0, T, steps + 1)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (Nt + 1, 2, n)
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def hs_norms(self, s: float) -> np.ndarray:
        return np.array([hs_norm(U[0], s) for U in self.states])

    def violations(self, which: str) -> np.ndarray:
        return np.array([subspace_violation(U, which) for U in self.states])

    def rows(self, s: float, spec: NonlinearitySpec | None = None, potential: PotentialSpec | None = None) -> list:
        """(t, Hs, Hs-2, energy or None, reality, parity) per sample."""
        out = []
        ham = spec is not None and spec.hamiltonian_data is not None
        for t, U in zip(self.times, self.states):
            e = hamiltonian_energy(spec, potential, U) if ham else None
            out.append([float(t), hs_norm(U[0], s), hs_norm(U[0], s - 2), e,
                        subspace_violation(U, "reality"), subspace_violation(U, "parity")])
        return out


@dataclass
class ConvergenceReport:
    rows: list  # [iterate, sup_diff, ratio]
    converged: bool
    T: float
    halvings: int = 0
    duhamel: list = field(default_factory=list)

    @property
    def ratios(self) -> list:
        return [r[2] for r in self.rows if r[2] is not None]


# ---------------------------------------------------------------------------
# constant-coefficient flow


def constant_flow(L, potential: PotentialSpec | None, state, t: float):
    """Exact flow of iE(Lambda + Op(L)) for x-independent diagonal L.

    L may be a MatrixSymbol with constant monomial coefficients, a (m2, m1)
    pair or None (L = 0).
    """
    X = state.array if isinstance(state, DoubledState) else np.asarray(state, dtype=complex)
    n = X.shape[-1]
    m2, m1 = _L_constants(L, n)
    Y = np.exp(t * generator_multipliers(n, m2, m1, potential)) * X
    return DoubledState.from_array(Y) if isinstance(state, DoubledState) else Y


def _L_constants(L, n):
    if L is None:
        return 0.0, 0.0
    if isinstance(L, MatrixSymbol):
        if not L.b.is_zero():
            raise ParameterError("constant flow needs a diagonal symbol")
        a = L.a
        for t in a.terms:
            if not t.profile.is_monomial:
                raise ParameterError("constant flow needs polynomial xi profiles")
        c2 = a.monomial_coeff(2).coeffs
        c1 = a.monomial_coeff(1).coeffs
        c0 = a.monomial_coeff(0).coeffs
        for c in (c2, c1, c0):
            if np.max(np.abs(np.delete(c, n // 2))) > 1e-12:
                raise ParameterError("constant flow needs x-independent coefficients")
        if abs(c0[n // 2]) > 1e-12:
            raise ParameterError("constant flow takes L = m2 (i xi)^2 + m1 (i xi)")
        return float(c2[n // 2].real / math.sqrt(2 * math.pi)), complex(c1[n // 2] / math.sqrt(2 * math.pi))
    m2, m1 = L
    return float(m2), complex(m1)


# ---------------------------------------------------------------------------
# frozen-coefficient linear solve


def remainder_forcing(spec: NonlinearitySpec, cutoff: CutoffProfile, U: np.ndarray) -> np.ndarray:
    """iE[F(U) - Op^BW(A(U))U]."""
    if spec.is_zero():
        return np.zeros_like(U)
    R = nonlinearity(spec, U) - MatrixOperator(build_A(spec, U), cutoff)(U)
    return 1j * _E * R


def _nrm(X) -> float:
    return float(np.sqrt(np.sum(np.abs(X) ** 2)))


def duhamel_step(bundle: ReductionBundle, M: Callable, V0, G0, G1, h: float, tol: float = 1e-12, maxit: int = 40,
                 mask: np.ndarray | None = None):
    """One exponential-trapezoid step of dV/dt = M V + G in reduced variables.

    W = Phi V evolves by e^{hL}; the bounded part Phi M Phi^{-1} - L and the
    forcing enter by the trapezoid rule, solved by the preconditioned sweep
    V <- V + Psi r(V). ``mask`` restricts V to the resolved band.
    Returns (V1, increments).
    """
    P = (lambda X: X) if mask is None else (lambda X: X * mask)
    mult = bundle.multipliers()
    eL = np.exp(h * mult)
    Phi, Psi = bundle.forward, bundle.inverse_approx
    W0 = Phi(V0)
    F0 = Phi(M(V0) + G0) - mult * W0
    base = eL * (W0 + 0.5 * h * F0) + 0.5 * h * Phi(G1)
    if bundle.is_identity():
        # Phi = Id: the implicit relation is a plain fixed point
        def r(V):
            return base - (V - 0.5 * h * (M(V) - mult * V))
    else:
        def r(V):
            W = Phi(V)
            return base - (W - 0.5 * h * (Phi(M(V)) - mult * W))

    V = P(Psi(base))
    incs = []
    scale = max(_nrm(V), 1e-300)
    for _ in range(maxit):
        dV = P(Psi(r(V)))
        V = V + dV
        incs.append(_nrm(dV) / scale)
        if incs[-1] < tol:
            return V, incs
    raise ConvergenceError("Duhamel fixed point did not converge", last_increment=incs[-1], iterations=maxit, increments=incs[:8])


def solve_linear(A_at: Callable, forcing: Callable, U0, times, potential: PotentialSpec | None, cutoff: CutoffProfile,
                 tol: float = 1e-12, maxit: int = 40, n_tau: int | None = None, spec: NonlinearitySpec | None = None,
                 mask: np.ndarray | None = None, refresh: int = 1) -> Trajectory:
    """dU/dt = iE(Lambda + Op^BW(A(t)))U + G(t), A frozen at step midpoints.

    ``A_at(t0, t1)`` returns the frozen state the symbol is built from, or
    None for A = 0; ``forcing(i)`` returns G at node i. The reduction is
    rebuilt every ``refresh`` steps, frozen at the middle of its block; it only
    sets the exponential and the preconditioner, so the step stays consistent.
    """
    from .nonlinear import NonlinearitySpec as _NS

    U = np.array(U0, dtype=complex)
    n = U.shape[-1]
    if mask is not None:
        U = U * mask
    states = [U.copy()]
    duh = []
    G_prev = forcing(0)
    N = len(times) - 1
    refresh = max(int(refresh), 1)
    bundle = None
    for i in range(N):
        h = times[i + 1] - times[i]
        G_next = forcing(i + 1)
        frozen = A_at(times[i], times[i + 1])
        if frozen is None:
            sysm = ParalinearizedSystem(_NS(), potential or PotentialSpec(), cutoff, np.zeros((2, n), complex))
            if bundle is None:
                bundle = reduce_full(sysm, check=False)
        else:
            sysm = ParalinearizedSystem(spec, potential or PotentialSpec(), cutoff, frozen)
            if i % refresh == 0:
                mid = A_at(times[i], times[min(i + refresh, N)]) if refresh > 1 else frozen
                sys_b = ParalinearizedSystem(spec, potential or PotentialSpec(), cutoff, mid)
                bundle = reduce_full(sys_b, check=False, n_tau=n_tau)
                if not bundle.is_identity() and refresh > 1:
                    bundle = bundle.dense()
        M = full_generator(sysm)
        U, incs = duhamel_step(bundle, M, U, G_prev, G_next, h, tol, maxit, mask)
        duh.append(incs)
        states.append(U.copy())
        G_prev = G_next
    return Trajectory(np.asarray(times), np.array(states), {"duhamel_increments": duh})


def solve_frozen_linear(spec: NonlinearitySpec, potential: PotentialSpec | None, U_prev: Trajectory | np.ndarray, U0,
                        config: SolverConfig, n_tau: int | None = None) -> Trajectory:
    """One linear problem of the iterative scheme: coefficients frozen at U_prev."""
    prev = U_prev.states if isinstance(U_prev, Trajectory) else np.asarray(U_prev)
    times = U_prev.times if isinstance(U_prev, Trajectory) else config.time_grid()
    if len(prev) != len(times):
        raise ParameterError("previous iterate does not cover the time grid", samples=len(prev), nodes=len(times))
    cutoff = config.cutoff
    index = {float(t): k for k, t in enumerate(times)}
    U0 = U0.array if isinstance(U0, DoubledState) else U0

    if spec.is_zero():
        A_at = lambda t0, t1: None
        forcing = lambda k: np.zeros_like(prev[0])
    else:
        def A_at(t0, t1):
            return 0.5 * (prev[index[float(t0)]] + prev[index[float(t1)]])

        cache: dict = {}

        def forcing(k):
            if k not in cache:
                cache[k] = remainder_forcing(spec, cutoff, prev[k])
            return cache[k]

    mask = None if spec.is_zero() else config.band_mask(np.shape(U0)[-1])
    return solve_linear(A_at, forcing, U0, times, potential, cutoff, config.duhamel_tol, config.duhamel_maxit,
                        n_tau, spec, mask, config.refresh_every)


def _sup_diff(a: np.ndarray, b: np.ndarray, s: float) -> float:
    return max(hs_norm(x[0] - y[0], s) for x, y in zip(a, b))


def iterate_quasilinear(spec: NonlinearitySpec, potential: PotentialSpec | None, U0, config: SolverConfig,
                        n_tau: int | None = None) -> tuple[Trajectory, ConvergenceReport]:
    """Scheme A_n with automatic halving of T on divergence."""
    U0 = U0.array if isinstance(U0, DoubledState) else np.asarray(U0, dtype=complex)
    if config.check:
        structural_gate(spec, potential, U0)
        if spec.structure_claim == "parity" and subspace_violation(U0, "parity") > 1e-9:
            raise ParameterError("parity claim needs an even initial state", violation=subspace_violation(U0, "parity"))
        if subspace_violation(U0, "reality") > 1e-9:
            raise ParameterError("initial state must lie on the reality subspace", violation=subspace_violation(U0, "reality"))
    T = config.T
    last_err = None
    for halving in range(config.max_halvings + 1):
        try:
            traj, rep = _iterate(spec, potential, U0, replace(config, T=T), n_tau)
            rep.halvings = halving
            return traj, rep
        except DivergenceError as exc:
            last_err = exc
            log.info("iteration diverged at T=%g, halving", T)
            T = T / 2
    raise last_err


def _iterate(spec, potential, U0, config: SolverConfig, n_tau) -> tuple[Trajectory, ConvergenceReport]:
    times = config.time_grid()
    free = np.array([constant_flow(None, potential, U0, t) for t in times])
    cur = Trajectory(times, free)
    rows = []
    duh = []
    s2 = config.s - 2
    if n_tau is None and not spec.is_zero():
        sysm = ParalinearizedSystem(spec, potential or PotentialSpec(), config.cutoff, U0)
        b = reduce_full(sysm, check=False)
        n_tau = b.paracomposition.n_tau if b.paracomposition is not None else None
    for it in range(1, config.max_iter + 1):
        nxt = solve_frozen_linear(spec, potential, cur, U0, config, n_tau)
        diff = _sup_diff(nxt.states, cur.states, s2)
        ratio = diff / rows[-1][1] if rows and rows[-1][1] > 0 else None
        rows.append([it, diff, ratio])
        duh.append(nxt.diagnostics["duhamel_increments"])
        cur = nxt
        if diff < config.tol:
            return cur, ConvergenceReport(rows, True, config.T, duhamel=duh)
        if len(rows) >= 3 and rows[-1][1] > rows[-2][1] > rows[-3][1]:
            raise DivergenceError("successive differences grew twice", rows=rows, T=config.T)
    raise ConvergenceError("iteration did not reach tolerance", rows=rows, T=config.T)


# ---------------------------------------------------------------------------
# reference integrator


def reference_solver(spec: NonlinearitySpec, potential: PotentialSpec | None, U0, config: SolverConfig | None = None,
                     dt: float | None = None, T: float | None = None, growth_limit: float = 1e6,
                     record_every: int = 1) -> Trajectory:
    """Integrating-factor RK4 on the scalar equation, nonlinearity evaluated pseudospectrally."""
    config = config or SolverConfig()
    dt = config.dt if dt is None else dt
    T = config.T if T is None else T
    U0 = U0.array if isinstance(U0, DoubledState) else np.asarray(U0, dtype=complex)
    u = U0[0].copy()
    n = u.size
    lam, _ = lambda_multipliers(n, potential)
    christ = spec.sign_mode == "christ"
    Lm = -1j * lam if christ else 1j * lam
    poly = spec.poly

    def N(c):
        if not poly:
            return np.zeros_like(c)
        s = to_samples(c)
        V = np.stack([s, np.conj(s), _ds(s, 1), np.conj(_ds(s, 1)), _ds(s, 2), np.conj(_ds(s, 2))])
        out = 1j * to_coeffs(poly_eval(poly, V))
        out[0] = 0.0
        return out

    steps = max(1, int(round(T / dt)))
    h = T / steps
    E1 = np.exp(h * Lm)
    E2 = np.exp(0.5 * h * Lm)
    times = [0.0]
    states = [U0.copy()]
    n0 = max(hs_norm(u, config.s), 1e-300)
    flag = None
    for i in range(steps):
        k1 = N(u)
        k2 = N(E2 * (u + 0.5 * h * k1))
        k3 = N(E2 * u + 0.5 * h * k2)
        k4 = N(E1 * u + h * E2 * k3)
        u = E1 * u + (h / 6.0) * (E1 * k1 + 2.0 * E2 * (k2 + k3) + k4)
        nrm = hs_norm(u, config.s)
        if not np.isfinite(nrm) or nrm > growth_limit * n0:
            flag = {"step": i + 1, "t": (i + 1) * h, "norm": float(nrm)}
            times.append((i + 1) * h)
            states.append(np.stack([u, conj_reflect(u)]))
            break
        if (i + 1) % record_every == 0 or i + 1 == steps:
            times.append((i + 1) * h)
            states.append(np.stack([u, conj_reflect(u)]))
    return Trajectory(np.array(times), np.array(states), {"blowup": flag})


def _ds(s, k):
    return to_samples(d_coeffs(to_coeffs(s), k))


# ---------------------------------------------------------------------------
# energy


def hamiltonian_energy(spec: NonlinearitySpec, potential: PotentialSpec | None, state) -> float:
    """int -|u_x|^2 + (P*u) conj(u) + F(u, u_x) dx by trapezoid quadrature."""
    if spec is None or spec.hamiltonian_data is None:
        raise CapabilityError("energy needs the density F", preset=getattr(spec, "name", None))
    U = state.array if isinstance(state, DoubledState) else np.asarray(state)
    c = U[0]
    n = c.size
    V = state_variables(np.stack([c, conj_reflect(c)]))
    u, ux = V[0], V[2]
    Pu = to_samples(c * (potential.multiplier(n) if potential is not None else 0.0))
    dens = -np.abs(ux) ** 2 + Pu * np.conj(u) + poly_eval(spec.F_poly, V)
    val = 2 * np.pi * np.mean(dens)
    scale = max(1.0, abs(val.real))
    if abs(val.imag) > 1e-10 * scale:
        raise ParameterError("energy has a non-negligible imaginary part", imag=float(val.imag))
    return float(val.real)
