"""Monomial nonlinearities, Wirtinger calculus and the paralinearized system.

A nonlinearity is a polynomial in the six variables
(u, conj u, u_x, conj u_x, u_xx, conj u_xx). Exponent tuples are indexed in
that order. The doubled extension evaluates f and its conjugate mirror on
(u+, u-, u+_x, u-_x, u+_xx, u-_xx).
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, EllipticityError, HypothesisError, ParameterError
from .quantizer import MatrixOperator
from .spectral import (
    DoubledState,
    PeriodicGrid,
    PotentialSpec,
    SpectralField,
    d_samples,
    to_coeffs,
    to_samples,
)
from .symbols import CutoffProfile, DiscreteSymbol, MatrixSymbol, make_cutoff

VARIABLES = ("u", "ubar", "ux", "ubarx", "uxx", "ubarxx")
_MIRROR = (1, 0, 3, 2, 5, 4)
Exps = tuple  # 6-tuple of ints


def var_index(v) -> int:
    if isinstance(v, (int, np.integer)):
        if 0 <= v < 6:
            return int(v)
    elif v in VARIABLES:
        return VARIABLES.index(v)
    raise ParameterError("unknown variable", variable=v, valid=list(VARIABLES))


@dataclass(frozen=True)
class Monomial:
    coeff: complex
    exps: Exps

    def __post_init__(self):
        e = tuple(int(x) for x in self.exps)
        if len(e) != 6 or min(e) < 0:
            raise ParameterError("monomial needs six nonnegative exponents", exps=list(e))
        object.__setattr__(self, "exps", e)
        object.__setattr__(self, "coeff", complex(self.coeff))

    @property
    def degree(self) -> int:
        return sum(self.exps)

    def mirror(self) -> "Monomial":
        return Monomial(np.conj(self.coeff), tuple(self.exps[i] for i in _MIRROR))

    def to_json(self) -> dict:
        return {"re": self.coeff.real, "im": self.coeff.imag, "exp": list(self.exps)}


# polynomial helpers on {exps: coeff} dicts


def _poly(monos: Iterable[Monomial]) -> dict:
    out: dict = {}
    for m in monos:
        out[m.exps] = out.get(m.exps, 0) + m.coeff
    return {e: c for e, c in out.items() if c != 0}


def _monos(poly: Mapping) -> tuple[Monomial, ...]:
    return tuple(Monomial(c, e) for e, c in sorted(poly.items()) if c != 0)


def poly_derivative(poly: Mapping, var: int) -> dict:
    out: dict = {}
    for e, c in poly.items():
        if e[var] == 0:
            continue
        e2 = list(e)
        e2[var] -= 1
        e2 = tuple(e2)
        out[e2] = out.get(e2, 0) + c * e[var]
    return {e: c for e, c in out.items() if c != 0}


def poly_mul_var(poly: Mapping, var: int) -> dict:
    out = {}
    for e, c in poly.items():
        e2 = list(e)
        e2[var] += 1
        out[tuple(e2)] = c
    return out


def poly_add(*polys: Mapping, signs: Sequence[float] | None = None) -> dict:
    out: dict = {}
    signs = signs or [1] * len(polys)
    for p, s in zip(polys, signs):
        for e, c in p.items():
            out[e] = out.get(e, 0) + s * c
    return {e: c for e, c in out.items() if abs(c) > 0}


def poly_mirror(poly: Mapping) -> dict:
    return {tuple(e[i] for i in _MIRROR): np.conj(c) for e, c in poly.items()}


def poly_eval(poly: Mapping, V: np.ndarray) -> np.ndarray:
    """Evaluate on stacked variable samples V of shape (6, n)."""
    out = np.zeros(V.shape[1:], dtype=complex)
    for e, c in poly.items():
        term = np.full(V.shape[1:], c, dtype=complex)
        for i, p in enumerate(e):
            if p:
                term = term * V[i] ** p
        out += term
    return out


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    monomials: tuple = ()
    hamiltonian_data: tuple | None = None
    structure_claim: str = "none"
    name: str = "custom"
    sign_mode: str = "standard"
    relaxed: bool = False

    def __post_init__(self):
        mons = _monos(_poly(self.monomials))
        object.__setattr__(self, "monomials", mons)
        if self.hamiltonian_data is not None:
            F = _monos(_poly(self.hamiltonian_data))
            for m in F:
                if m.exps[4] or m.exps[5]:
                    raise ParameterError("energy density depends on (u, conj u, u_x, conj u_x) only", exps=list(m.exps))
            object.__setattr__(self, "hamiltonian_data", F)
        if self.structure_claim not in ("hamiltonian", "parity", "none"):
            raise ParameterError("claim must be hamiltonian, parity or none", claim=self.structure_claim)
        for m in mons:
            if m.degree < 2 and not self.relaxed:
                raise ParameterError("nonlinearity must vanish at order two", exps=list(m.exps))

    @property
    def poly(self) -> dict:
        return _poly(self.monomials)

    @property
    def F_poly(self) -> dict | None:
        return None if self.hamiltonian_data is None else _poly(self.hamiltonian_data)

    def is_zero(self) -> bool:
        return not self.monomials

    def mirror(self) -> "NonlinearitySpec":
        return NonlinearitySpec(_monos(poly_mirror(self.poly)), None, "none", self.name + "~", self.sign_mode, self.relaxed)

    def to_json(self) -> dict:
        out = {"name": self.name, "monomials": [m.to_json() for m in self.monomials], "claim": self.structure_claim}
        if self.hamiltonian_data is not None:
            out["F"] = [m.to_json() for m in self.hamiltonian_data]
        if self.sign_mode != "standard":
            out["sign_mode"] = self.sign_mode
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "NonlinearitySpec":
        def parse(lst, path):
            out = []
            for i, d in enumerate(lst):
                try:
                    out.append(Monomial(complex(float(d.get("re", 0.0)), float(d.get("im", 0.0))), tuple(d["exp"])))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ConfigError("malformed monomial", path=f"{path}[{i}]", reason=str(exc))
            return out

        mons = parse(obj.get("monomials", []), "spec.monomials")
        F = parse(obj["F"], "spec.F") if obj.get("F") is not None else None
        return cls(tuple(mons), None if F is None else tuple(F), obj.get("claim", "none"), obj.get("name", "custom"),
                   obj.get("sign_mode", "standard"))


def _m(c, *e) -> Monomial:
    return Monomial(c, e)


def preset(name: str, p: int | None = None) -> NonlinearitySpec:
    """zero, manuela, manuela1, manuela2, christ(p)."""
    mt = re.fullmatch(r"christ(?:\((\d+)\))?", name)
    if mt:
        p = int(mt.group(1) or p or 2)
        if p < 2:
            raise ParameterError("christ preset needs p >= 2", p=p)
        return NonlinearitySpec((_m(1j, p - 1, 0, 1, 0, 0, 0),), None, "none", f"christ({p})", "christ")
    if name == "zero":
        return NonlinearitySpec((), (), "hamiltonian", "zero")
    if name == "manuela":
        f = (_m(1, 1, 1, 0, 0, 1, 0), _m(1, 0, 1, 2, 0, 0, 0), _m(1, 1, 0, 1, 0, 0, 0), _m(-1, 0, 1, 1, 0, 0, 0))
        F = (_m(-1, 1, 1, 1, 1, 0, 0), _m(1, 1, 1, 1, 0, 0, 0), _m(1, 1, 1, 0, 1, 0, 0))
        return NonlinearitySpec(f, F, "hamiltonian", "manuela")
    if name == "manuela1":
        return NonlinearitySpec((_m(1, 1, 1, 0, 0, 1, 0),), None, "parity", "manuela1")
    if name == "manuela2":
        return NonlinearitySpec((_m(-1, 1, 1, 0, 0, 1, 0),), None, "parity", "manuela2")
    raise ConfigError("unknown preset", preset=name, valid=list(PRESETS))


PRESETS = ("zero", "manuela", "manuela1", "manuela2", "christ(p)")


# ---------------------------------------------------------------------------
# evaluation on states


def wirtinger_derivative(spec: NonlinearitySpec, variable) -> NonlinearitySpec:
    i = var_index(variable)
    return NonlinearitySpec(_monos(poly_derivative(spec.poly, i)), None, "none", f"d_{VARIABLES[i]} {spec.name}", relaxed=True)


def state_variables(U: np.ndarray) -> np.ndarray:
    """(u+, u-, u+_x, u-_x, u+_xx, u-_xx) samples from coefficients U (2, n)."""
    s = to_samples(U)
    s1 = d_samples(s, 1)
    s2 = d_samples(s, 2)
    return np.stack([s[0], s[1], s1[0], s1[1], s2[0], s2[1]])


def _state_array(state) -> np.ndarray:
    return state.array if isinstance(state, DoubledState) else np.asarray(state, dtype=complex)


def nonlinearity(spec: NonlinearitySpec, state) -> np.ndarray:
    """Doubled nonlinearity (f1, f2) as coefficients (2, n), Nyquist zeroed."""
    U = _state_array(state)
    if spec.is_zero():
        return np.zeros_like(U)
    V = state_variables(U)
    poly = spec.poly
    out = to_coeffs(np.stack([poly_eval(poly, V), poly_eval(poly_mirror(poly), V)]))
    out[:, 0] = 0.0
    return out


def linearization_coeffs(spec: NonlinearitySpec, state) -> dict:
    """Samples of the six first Wirtinger derivatives on the state."""
    V = state_variables(_state_array(state))
    poly = spec.poly
    return {name: poly_eval(poly_derivative(poly, i), V) for i, name in enumerate(VARIABLES)}


def _weyl_coeffs(c2, c1, c0):
    """Weyl coefficients of Op(c2 (i xi)^2 + c1 (i xi) + c0)."""
    a2 = c2
    a1 = c1 - d_samples(c2, 1)
    a0 = c0 + 0.25 * d_samples(c2, 2) - 0.5 * d_samples(c1, 1)
    return a2, a1, a0


def build_A(spec: NonlinearitySpec, state) -> MatrixSymbol:
    U = _state_array(state)
    n = U.shape[-1]
    grid = PeriodicGrid(n)
    if spec.is_zero():
        return MatrixSymbol.zero(grid)
    L = linearization_coeffs(spec, U)
    a2, a1, a0 = _weyl_coeffs(L["uxx"], L["ux"], L["u"])
    b2, b1, b0 = _weyl_coeffs(L["ubarxx"], L["ubarx"], L["ubar"])
    a = DiscreteSymbol.from_monomials({2: a2, 1: a1, 0: a0}, grid, order=2)
    b = DiscreteSymbol.from_monomials({2: b2, 1: b1, 0: b0}, grid, order=2)
    return MatrixSymbol(a, b)


def A_fields(A: MatrixSymbol) -> dict:
    """Samples of a2, a1, a0, b2, b1, b0."""
    out = {}
    for nm, sym in (("a", A.a), ("b", A.b)):
        for k in (2, 1, 0):
            out[f"{nm}{k}"] = np.array(sym.monomial_coeff(k).samples)
    return out


def remainder(spec: NonlinearitySpec, state, cutoff: CutoffProfile) -> np.ndarray:
    """R(U)[U] = F(U) - Op^BW(A(U))U, exact at the discrete level."""
    U = _state_array(state)
    return nonlinearity(spec, U) - MatrixOperator(build_A(spec, U), cutoff)(U)


@dataclass
class ParalinearizedSystem:
    spec: NonlinearitySpec
    potential: PotentialSpec
    cutoff: CutoffProfile
    state: np.ndarray
    A: MatrixSymbol = field(init=False)

    def __post_init__(self):
        self.state = _state_array(self.state)
        self.A = build_A(self.spec, self.state)

    @property
    def n(self) -> int:
        return self.state.shape[-1]

    def operator(self) -> MatrixOperator:
        return MatrixOperator(self.A, self.cutoff)

    def remainder(self) -> np.ndarray:
        return nonlinearity(self.spec, self.state) - self.operator()(self.state)


def paralinearize(spec, state, potential=None, cutoff=None) -> ParalinearizedSystem:
    return ParalinearizedSystem(spec, potential or PotentialSpec(), cutoff or make_cutoff(), state)


# ---------------------------------------------------------------------------
# structural checks


@dataclass
class CheckReport:
    name: str
    ok: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"check": self.name, "ok": self.ok, **self.details}

    def raise_if_failed(self):
        if self.ok:
            return self
        if self.name == "ellipticity":
            raise EllipticityError("ellipticity hypothesis violated", **self.details)
        raise HypothesisError(f"{self.name} hypothesis violated", **self.details)


def _seed() -> int:
    return int(os.environ.get("PARADIFF_SEED", "0"))


def sample_states(n: int = 64, count: int = 3, amp: float = 0.3, even: bool = False, seed: int | None = None) -> list:
    """Smooth random reality-subspace states (low modes only)."""
    rng = np.random.default_rng(_seed() if seed is None else seed)
    out = []
    for _ in range(count):
        c = np.zeros(n, dtype=complex)
        for j in range(-4, 5):
            z = (rng.normal() + 1j * rng.normal()) * amp / (1 + j * j)
            c[j + n // 2] += z
            if even:
                c[-j + n // 2] += z
        if even:
            c = 0.5 * c
        u = SpectralField(PeriodicGrid(n), c)
        out.append(DoubledState.from_scalar(u).array)
    return out


def hamiltonian_vector_field(F: Mapping) -> dict:
    """d_{ubar}F - d/dx (d_{ubar_x}F), expanded as a polynomial."""
    G = poly_derivative(F, 3)
    ddx = poly_add(
        poly_mul_var(poly_derivative(G, 0), 2),
        poly_mul_var(poly_derivative(G, 1), 3),
        poly_mul_var(poly_derivative(G, 2), 4),
        poly_mul_var(poly_derivative(G, 3), 5),
    )
    return poly_add(poly_derivative(F, 1), ddx, signs=[1, -1])


def check_hamiltonian(spec: NonlinearitySpec, tol: float = 1e-10, n: int = 64) -> CheckReport:
    details: dict = {}
    ok = True
    if spec.F_poly is not None:
        target = hamiltonian_vector_field(spec.F_poly)
        diff = poly_add(spec.poly, target, signs=[1, -1])
        diff = {e: c for e, c in diff.items() if abs(c) > tol}
        if diff:
            ok = False
            details["monomial_diff"] = [
                {"exp": list(e), "in_f": _pair(spec.poly.get(e, 0)), "from_F": _pair(target.get(e, 0))} for e, c in sorted(diff.items())
            ]
    else:
        details["energy_density"] = "absent"
    worst_a2 = worst_a1 = 0.0
    for U in sample_states(n):
        f = A_fields(build_A(spec, U))
        worst_a2 = max(worst_a2, float(np.max(np.abs(f["a2"].imag))))
        worst_a1 = max(worst_a1, float(np.max(np.abs(f["a1"].real))))
    details["max_abs_imag_a2"] = worst_a2
    details["max_abs_real_a1"] = worst_a1
    if worst_a2 > tol or worst_a1 > tol:
        ok = False
    return CheckReport("hamiltonian", ok, details)


def _pair(c) -> list:
    c = complex(c)
    return [c.real, c.imag]


def check_parity(spec: NonlinearitySpec, potential: PotentialSpec | None = None, tol: float = 1e-12) -> CheckReport:
    poly = spec.poly
    odd = [list(e) for e in poly if (e[2] + e[3]) % 2]
    d3 = poly_derivative(poly, 4)
    asym = poly_add(d3, poly_mirror(d3), signs=[1, -1])
    asym = {e: c for e, c in asym.items() if abs(c) > tol}
    pot_ok = True if potential is None else bool(
        potential.symmetric_flag or all(potential.coeffs.get(-j, 0.0) == v for j, v in potential.coeffs.items())
    )
    details = {
        "odd_in_ux": odd,
        "nonreal_d_uxx": [list(e) for e in sorted(asym)],
        "potential_symmetric": pot_ok,
    }
    return CheckReport("parity", not odd and not asym and pot_ok, details)


def check_ellipticity(spec: NonlinearitySpec, state, c1: float = 1e-3, c2: float = 1e-3) -> CheckReport:
    U = _state_array(state)
    f = A_fields(build_A(spec, U)) if not spec.is_zero() else {"a2": np.zeros(U.shape[-1]), "b2": np.zeros(U.shape[-1])}
    one = 1.0 + f["a2"].real
    det = one**2 - np.abs(f["b2"]) ** 2
    i1, i2 = int(np.argmin(one)), int(np.argmin(det))
    n = U.shape[-1]
    x = 2 * np.pi * np.arange(n) / n
    details = {
        "min_1_plus_a2": float(one[i1]),
        "argmin_1_plus_a2_x": float(x[i1]),
        "min_determinant": float(det[i2]),
        "argmin_determinant_x": float(x[i2]),
        "c1": c1,
        "c2": c2,
    }
    bad = (one < c1) | (det < c2)
    if np.any(bad):
        # smallest |u| among violating points: the margin report names the bad region
        absu = np.abs(to_samples(U[0]))
        details["violated_where_abs_u_at_least"] = float(np.min(absu[bad]))
        details["violating_fraction"] = float(np.mean(bad))
    return CheckReport("ellipticity", bool(one[i1] >= c1 and det[i2] >= c2), details)


def structural_gate(spec: NonlinearitySpec, potential: PotentialSpec | None, state=None, c1=1e-3, c2=1e-3) -> list:
    """Run the checks implied by the claim; raise on the first failure."""
    reports = []
    if spec.structure_claim == "hamiltonian":
        reports.append(check_hamiltonian(spec).raise_if_failed())
    elif spec.structure_claim == "parity":
        reports.append(check_parity(spec, potential).raise_if_failed())
    if state is not None:
        reports.append(check_ellipticity(spec, state, c1, c2).raise_if_failed())
    return reports
