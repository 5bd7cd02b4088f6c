"""Discrete symbols a(x, xi), admissible cutoffs, regularization, the sharp
product and exponentials of 2x2 function-symbols.

A symbol is a finite sum of separable terms coeff(x) * profile(xi). Profiles
are either monomials (i xi)^k with k <= 2 or tables sampled on the
half-integer grid xi in {-n, -n + 1/2, ..., n} (length 4n + 1, index
g = 2 xi + 2n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError, SizeError, StructureError, UnsupportedOrderError
from .spectral import (
    SQRT2PI,
    PeriodicGrid,
    SpectralField,
    conj_reflect,
    d_coeffs,
    to_coeffs,
    to_samples,
)

MAX_RHO = 3


# ---------------------------------------------------------------------------
# xi grid


@lru_cache(maxsize=None)
def xi_grid(n: int) -> np.ndarray:
    """Half-integer frequencies -n, -n + 1/2, ..., n."""
    g = np.arange(4 * n + 1) / 2.0 - n
    g.flags.writeable = False
    return g


def xi_index(n: int, xi) -> np.ndarray:
    g = 2.0 * np.asarray(xi, dtype=float) + 2 * n
    gi = np.rint(g).astype(int)
    if np.any(np.abs(g - gi) > 1e-9) or np.any(gi < 0) or np.any(gi > 4 * n):
        raise ParameterError("xi must lie on the half-integer grid [-n, n]", n=n)
    return gi


@lru_cache(maxsize=None)
def _monomial_table(n: int, k: int) -> np.ndarray:
    v = (1j * xi_grid(n)) ** k
    v.flags.writeable = False
    return v


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True, eq=False)
class XiProfile:
    """monomial (i xi)^k, or a table over the half-integer xi grid."""

    kind: str
    k: int = 0
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "monomial":
            if self.k not in (0, 1, 2):
                raise ParameterError("monomial profile degree must be 0, 1 or 2", k=self.k)
        elif self.kind == "table":
            t = np.array(self.table, dtype=complex)
            if t.ndim != 1 or (t.size - 1) % 4 or t.size < 33:
                raise SizeError("table profile must have length 4n + 1", got=int(t.size))
            t.flags.writeable = False
            object.__setattr__(self, "table", t)
        else:
            raise ParameterError("profile kind must be monomial or table", kind=self.kind)

    @classmethod
    def monomial(cls, k: int) -> "XiProfile":
        return _MONO[k] if k in _MONO else cls("monomial", k)

    @classmethod
    def from_table(cls, values) -> "XiProfile":
        return cls("table", 0, values)

    @property
    def is_monomial(self) -> bool:
        return self.kind == "monomial"

    @property
    def key(self):
        return ("m", self.k) if self.is_monomial else ("t", id(self))

    def values(self, n: int) -> np.ndarray:
        if self.is_monomial:
            return _monomial_table(n, self.k)
        if self.table.size != 4 * n + 1:
            raise SizeError("table profile lives on a different grid", expected=4 * n + 1, got=int(self.table.size))
        return self.table

    def at(self, n: int, xi) -> np.ndarray:
        if self.is_monomial:
            return (1j * np.asarray(xi, dtype=float)) ** self.k
        return self.values(n)[xi_index(n, xi)]

    def dxi(self, r: int) -> list[tuple[complex, "XiProfile"]]:
        """r-th xi derivative as a list of (scale, profile)."""
        if r == 0:
            return [(1.0, self)]
        if self.is_monomial:
            if r > self.k:
                return []
            scale = (1j ** r) * math.factorial(self.k) / math.factorial(self.k - r)
            return [(scale, XiProfile.monomial(self.k - r))]
        v = self.table
        for _ in range(r):
            v = np.gradient(v, 0.5)  # centered, one-sided at the band edges
        return [(1.0, XiProfile.from_table(v))]

    def reflect_conj(self) -> "XiProfile":
        """p -> conj p(-xi); monomials are invariant."""
        if self.is_monomial:
            return self
        return XiProfile.from_table(np.conj(self.table[::-1]))

    def conj(self) -> tuple[complex, "XiProfile"]:
        if self.is_monomial:
            return (-1.0) ** self.k, self
        return 1.0, XiProfile.from_table(np.conj(self.table))

    def times(self, other: "XiProfile", n: int) -> "XiProfile":
        if self.is_monomial and other.is_monomial and self.k + other.k <= 2:
            return XiProfile.monomial(self.k + other.k)
        return XiProfile.from_table(self.values(n) * other.values(n))

    def to_json(self) -> dict:
        if self.is_monomial:
            return {"kind": "monomial", "k": self.k}
        return {"kind": "table", "values": [[float(z.real), float(z.imag)] for z in self.table]}

    @classmethod
    def from_json(cls, obj) -> "XiProfile":
        if obj["kind"] == "monomial":
            return cls.monomial(int(obj["k"]))
        return cls.from_table([complex(a, b) for a, b in obj["values"]])


_MONO = {k: XiProfile("monomial", k) for k in (0, 1, 2)}


# ---------------------------------------------------------------------------
# symbols


@dataclass(frozen=True, eq=False)
class SymbolTerm:
    coeff: SpectralField
    profile: XiProfile


class DiscreteSymbol:
    """a(x, xi) = sum_i coeff_i(x) profile_i(xi) on a shared grid."""

    __slots__ = ("grid", "terms", "order")

    def __init__(self, grid, terms: Iterable[SymbolTerm] = (), order: float | None = None):
        grid = grid if isinstance(grid, PeriodicGrid) else PeriodicGrid(int(grid))
        terms = tuple(terms)
        for t in terms:
            if t.coeff.n != grid.n_points:
                raise SizeError("symbol term lives on a different grid", expected=grid.n_points, got=t.coeff.n)
            if not t.profile.is_monomial:
                t.profile.values(grid.n_points)
        if order is None:
            order = max((t.profile.k for t in terms if t.profile.is_monomial), default=0)
        self.grid = grid
        self.terms = terms
        self.order = float(order)

    # construction helpers

    @classmethod
    def zero(cls, grid) -> "DiscreteSymbol":
        return cls(grid, ())

    @classmethod
    def from_monomials(cls, fields: dict, grid=None, order=None) -> "DiscreteSymbol":
        """{k: SpectralField | sample array | scalar} -> sum_k c_k(x) (i xi)^k."""
        terms = []
        for k, c in sorted(fields.items()):
            c = _as_field(c, grid)
            grid = c.grid
            terms.append(SymbolTerm(c, XiProfile.monomial(int(k))))
        if grid is None:
            raise ParameterError("a grid is needed to build a symbol from scalars")
        return cls(grid, terms, order)

    @classmethod
    def constant(cls, grid, value: complex, k: int = 0) -> "DiscreteSymbol":
        return cls.from_monomials({k: SpectralField.constant(grid, value)}, grid)

    @classmethod
    def multiplier(cls, grid, table, order: float = 0.0) -> "DiscreteSymbol":
        """x-independent symbol given by a xi table."""
        grid = grid if isinstance(grid, PeriodicGrid) else PeriodicGrid(int(grid))
        return cls(grid, [SymbolTerm(SpectralField.constant(grid, 1.0), XiProfile.from_table(table))], order)

    @property
    def n(self) -> int:
        return self.grid.n_points

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(np.max(np.abs(t.coeff.coeffs)) <= tol for t in self.terms)

    def monomial_coeff(self, k: int) -> SpectralField:
        c = np.zeros(self.n, dtype=complex)
        for t in self.terms:
            if t.profile.is_monomial and t.profile.k == k:
                c = c + t.coeff.coeffs
        return SpectralField(self.grid, c)

    # evaluation

    def evaluate(self, xi) -> np.ndarray:
        """Samples a(x_j, xi) with shape (n, len(xi))."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.zeros((self.n, xi.size), dtype=complex)
        for t in self.terms:
            out += np.outer(t.coeff.samples, t.profile.at(self.n, xi))
        return out

    def kernel_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(plain-average coefficients (T, n), profile tables (T, 4n + 1))."""
        n = self.n
        if not self.terms:
            return np.zeros((1, n), complex), np.zeros((1, 4 * n + 1), complex)
        coef = np.stack([t.coeff.coeffs for t in self.terms]) / SQRT2PI
        prof = np.stack([t.profile.values(n) for t in self.terms])
        return coef, prof

    # algebra

    def merged(self) -> "DiscreteSymbol":
        acc: dict = {}
        order = []
        for t in self.terms:
            key = t.profile.key
            if key in acc:
                acc[key] = (acc[key][0] + t.coeff.coeffs, t.profile)
            else:
                acc[key] = (np.array(t.coeff.coeffs), t.profile)
                order.append(key)
        terms = [SymbolTerm(SpectralField(self.grid, acc[k][0]), acc[k][1]) for k in order]
        terms = [t for t in terms if np.any(t.coeff.coeffs != 0)]
        return DiscreteSymbol(self.grid, terms, self.order)

    def __add__(self, other: "DiscreteSymbol") -> "DiscreteSymbol":
        _same_grid(self, other)
        return DiscreteSymbol(self.grid, self.terms + other.terms, max(self.order, other.order)).merged()

    def __neg__(self) -> "DiscreteSymbol":
        return self.scale(-1.0)

    def __sub__(self, other: "DiscreteSymbol") -> "DiscreteSymbol":
        return self + (-other)

    def scale(self, c: complex) -> "DiscreteSymbol":
        return DiscreteSymbol(self.grid, [SymbolTerm(t.coeff.scale(c), t.profile) for t in self.terms], self.order)

    def times_field(self, f: SpectralField) -> "DiscreteSymbol":
        terms = [SymbolTerm(SpectralField.from_samples(t.coeff.samples * f.samples, self.grid), t.profile) for t in self.terms]
        return DiscreteSymbol(self.grid, terms, self.order)

    def dx(self, r: int = 1) -> "DiscreteSymbol":
        terms = [SymbolTerm(SpectralField(self.grid, d_coeffs(t.coeff.coeffs, r)), t.profile) for t in self.terms]
        return DiscreteSymbol(self.grid, terms, self.order)

    def dxi(self, r: int = 1) -> "DiscreteSymbol":
        terms = []
        for t in self.terms:
            for scale, p in t.profile.dxi(r):
                terms.append(SymbolTerm(t.coeff.scale(scale), p))
        return DiscreteSymbol(self.grid, terms, self.order - r)

    def conj(self) -> "DiscreteSymbol":
        """conj a(x, xi)."""
        terms = []
        for t in self.terms:
            s, p = t.profile.conj()
            terms.append(SymbolTerm(t.coeff.conj().scale(s), p))
        return DiscreteSymbol(self.grid, terms, self.order)

    def reflect_conj(self) -> "DiscreteSymbol":
        """conj a(x, -xi), the completion rule of the doubled system."""
        terms = [SymbolTerm(t.coeff.conj(), t.profile.reflect_conj()) for t in self.terms]
        return DiscreteSymbol(self.grid, terms, self.order)

    def pointwise(self, other: "DiscreteSymbol") -> "DiscreteSymbol":
        _same_grid(self, other)
        n = self.n
        terms = []
        for s in self.terms:
            for t in other.terms:
                c = SpectralField.from_samples(s.coeff.samples * t.coeff.samples, self.grid)
                terms.append(SymbolTerm(c, s.profile.times(t.profile, n)))
        return DiscreteSymbol(self.grid, terms, self.order + other.order).merged()

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "terms": [{"coeff": t.coeff.to_json(), "profile": t.profile.to_json()} for t in self.terms],
        }

    @classmethod
    def from_json(cls, obj) -> "DiscreteSymbol":
        terms = [SymbolTerm(SpectralField.from_json(t["coeff"]), XiProfile.from_json(t["profile"])) for t in obj["terms"]]
        grid = terms[0].coeff.grid if terms else PeriodicGrid(int(obj.get("n", 8)))
        return cls(grid, terms, obj.get("order"))

    def __repr__(self):
        kinds = ",".join(f"k{t.profile.k}" if t.profile.is_monomial else "tab" for t in self.terms)
        return f"DiscreteSymbol(n={self.n}, order={self.order}, terms=[{kinds}])"


def _same_grid(a: DiscreteSymbol, b: DiscreteSymbol):
    if a.n != b.n:
        raise SizeError("symbols live on different grids", left=a.n, right=b.n)


def _as_field(c, grid) -> SpectralField:
    if isinstance(c, SpectralField):
        return c
    if np.ndim(c) == 0:
        if grid is None:
            raise ParameterError("scalar coefficient needs a grid")
        return SpectralField.constant(grid, complex(c))
    return SpectralField.from_samples(np.asarray(c, dtype=complex), grid)


# ---------------------------------------------------------------------------
# matrix symbols


@dataclass(frozen=True, eq=False)
class MatrixSymbol:
    """[[a, b], [conj b(x,-xi), conj a(x,-xi)]] by the completion rule."""

    a: DiscreteSymbol
    b: DiscreteSymbol

    def __post_init__(self):
        _same_grid(self.a, self.b)

    @classmethod
    def zero(cls, grid) -> "MatrixSymbol":
        return cls(DiscreteSymbol.zero(grid), DiscreteSymbol.zero(grid))

    @property
    def grid(self) -> PeriodicGrid:
        return self.a.grid

    @property
    def n(self) -> int:
        return self.a.n

    def blocks(self) -> tuple[DiscreteSymbol, DiscreteSymbol, DiscreteSymbol, DiscreteSymbol]:
        return self.a, self.b, self.b.reflect_conj(), self.a.reflect_conj()

    def evaluate(self, xi) -> np.ndarray:
        """Full matrix values, shape (2, 2, n, len(xi))."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        a = self.a.evaluate(xi)
        b = self.b.evaluate(xi)
        ar = np.conj(self.a.evaluate(-xi))
        br = np.conj(self.b.evaluate(-xi))
        return np.array([[a, b], [br, ar]])

    def to_json(self) -> dict:
        return {"a": self.a.to_json(), "b": self.b.to_json()}


# ---------------------------------------------------------------------------
# cutoff


def bump(t, delta: float) -> np.ndarray:
    """Even C-infinity bump: 1 on |t| <= delta/2, 0 on |t| >= delta."""
    t = np.abs(np.asarray(t, dtype=float))
    half = delta / 2.0
    s = np.clip((t - half) / half, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        g1 = np.where(1.0 - s > 0, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
        g0 = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
    out = g1 / (g1 + g0)
    out = np.where(t <= half, 1.0, out)
    return np.where(t >= delta, 0.0, out)


@dataclass(frozen=True)
class CutoffProfile:
    delta: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ParameterError("cutoff delta must lie in (0, 1)", delta=self.delta)

    def __call__(self, xi_prime, xi) -> np.ndarray:
        return bump(np.asarray(xi_prime, float) / np.sqrt(1.0 + np.asarray(xi, float) ** 2), self.delta)

    def bandwidth(self, n: int) -> int:
        """Largest |m| that can carry a nonzero cutoff for Weyl midpoints |xi| <= n/2."""
        return int(min(math.floor(self.delta * math.sqrt(1.0 + n * n / 4.0)), n // 2 - 1))

    def table(self, n: int, bw: int | None = None) -> np.ndarray:
        return chi_table(n, self.delta, self.bandwidth(n) if bw is None else bw)


def make_cutoff(delta: float = 0.5) -> CutoffProfile:
    return CutoffProfile(float(delta))


@lru_cache(maxsize=32)
def chi_table(n: int, delta: float, bw: int) -> np.ndarray:
    """chi(m, xi_g) for m = -bw..bw over the half-integer xi grid."""
    m = np.arange(-bw, bw + 1, dtype=float)[:, None]
    xi = xi_grid(n)[None, :]
    t = bump(m / np.sqrt(1.0 + xi**2), delta).astype(complex)
    t.flags.writeable = False
    return t


@lru_cache(maxsize=32)
def ones_table(n: int, bw: int) -> np.ndarray:
    t = np.ones((2 * bw + 1, 4 * n + 1), dtype=complex)
    t.flags.writeable = False
    return t


# ---------------------------------------------------------------------------
# per-mode expansion (regularization, quantization change)


def _mode_expansion(sym: DiscreteSymbol, shift_table) -> DiscreteSymbol:
    """Rewrite sym as sum_m e^{imx} q_m(xi) with q_m = shift_table(m, p_m)."""
    n = sym.n
    coef, prof = sym.kernel_arrays()
    terms = []
    for i in range(1, n):  # skip the Nyquist mode
        m = i - n // 2
        col = coef[:, i]
        if not np.any(col):
            continue
        q = shift_table(m, col @ prof)
        if not np.any(q):
            continue
        c = np.zeros(n, dtype=complex)
        c[i] = SQRT2PI
        terms.append(SymbolTerm(SpectralField(sym.grid, c), XiProfile.from_table(q)))
    return DiscreteSymbol(sym.grid, terms, sym.order)


def regularize(sym: DiscreteSymbol, cutoff: CutoffProfile) -> DiscreteSymbol:
    """a_chi(x, xi) = sum_m chi(m, xi) a_m(xi) e^{imx}, as per-mode table terms."""
    xi = xi_grid(sym.n)
    return _mode_expansion(sym, lambda m, q: cutoff(m, xi) * q)


def weyl_from_standard(sym: DiscreteSymbol) -> DiscreteSymbol:
    """Weyl symbol b with Op^W(b) = Op(a), b_m(xi) = a_m(xi - m/2)."""
    terms = []
    has_table = False
    for t in sym.terms:
        if not t.profile.is_monomial:
            has_table = True
            continue
        k = t.profile.k
        for r in range(k + 1):
            c = d_coeffs(t.coeff.coeffs, r) * (math.comb(k, r) * (-0.5) ** r)
            terms.append(SymbolTerm(SpectralField(sym.grid, c), XiProfile.monomial(k - r)))
    out = DiscreteSymbol(sym.grid, terms, sym.order).merged()
    if has_table:
        tab = DiscreteSymbol(sym.grid, [t for t in sym.terms if not t.profile.is_monomial], sym.order)

        def shift(m, q):
            # q(xi - m/2) on the half grid is an index shift by m
            out_q = np.empty_like(q)
            if m >= 0:
                out_q[m:] = q[: q.size - m]
                out_q[:m] = q[0]
            else:
                out_q[:m] = q[-m:]
                out_q[m:] = q[-1]
            return out_q

        out = DiscreteSymbol(sym.grid, out.terms + _mode_expansion(tab, shift).terms, sym.order)
    return out


# ---------------------------------------------------------------------------
# sharp product


def sharp_product(a: DiscreteSymbol, b: DiscreteSymbol, rho: int) -> DiscreteSymbol:
    """Truncated Weyl composition (a # b)_rho = sum_{l < rho} of the Moyal terms."""
    if not isinstance(rho, (int, np.integer)) or rho < 1:
        raise ParameterError("rho must be a positive integer", rho=rho)
    if rho > MAX_RHO:
        raise UnsupportedOrderError("sharp product implemented up to rho = 3", rho=int(rho), max_rho=MAX_RHO)
    _same_grid(a, b)
    out = DiscreteSymbol.zero(a.grid)
    for ell in range(rho):
        part = sharp_term(a, b, ell)
        out = DiscreteSymbol(a.grid, out.terms + part.terms, a.order + b.order)
    return out.merged()


def sharp_term(a: DiscreteSymbol, b: DiscreteSymbol, ell: int) -> DiscreteSymbol:
    """The ell-th term (1/ell!)(-i/2)^ell sum_r C(ell,r)(-1)^(ell-r) (d_xi^r d_x^(ell-r) a)(d_x^r d_xi^(ell-r) b)."""
    pref = (-0.5j) ** ell / math.factorial(ell)
    out = DiscreteSymbol.zero(a.grid)
    for r in range(ell + 1):
        c = pref * math.comb(ell, r) * (-1) ** (ell - r)
        left = a.dxi(r).dx(ell - r)
        right = b.dx(r).dxi(ell - r)
        prod = left.pointwise(right).scale(c)
        out = DiscreteSymbol(a.grid, out.terms + prod.terms)
    return DiscreteSymbol(a.grid, out.merged().terms, a.order + b.order - ell)


# ---------------------------------------------------------------------------
# exponentials of function symbols


def _function_samples(sym: DiscreteSymbol, what: str) -> np.ndarray:
    for t in sym.terms:
        if not (t.profile.is_monomial and t.profile.k == 0) and np.any(t.coeff.coeffs):
            raise StructureError(f"{what} must be a function symbol (xi-independent)")
    return sym.monomial_coeff(0).samples


def shc_series(r2: np.ndarray, tol: float = 1e-17) -> np.ndarray:
    """sum_k r2^k / (2k+1)!, i.e. sinh(r)/r without dividing at r = 0."""
    r2 = np.asarray(r2, dtype=float)
    term = np.ones_like(r2)
    total = term.copy()
    k = 0
    while True:
        k += 1
        term = term * r2 / ((2 * k) * (2 * k + 1))
        total = total + term
        if np.all(np.abs(term) <= tol * np.abs(total)) or k > 200:
            return total


def exp_antidiag(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(c1, c2) with exp [[0, z], [conj z, 0]] = [[c1, c2], [conj c2, c1]]."""
    r2 = np.abs(z) ** 2
    return np.cosh(np.sqrt(r2)), z * shc_series(r2)


def symbol_exp(mat: MatrixSymbol, tol: float = 0.0) -> MatrixSymbol:
    """exp of diag(s, conj s) or of the antidiagonal (0, z; conj z, 0)."""
    grid = mat.grid
    a_zero = mat.a.is_zero(tol)
    b_zero = mat.b.is_zero(tol)
    if b_zero:
        s = _function_samples(mat.a, "diagonal entry")
        return MatrixSymbol(DiscreteSymbol.from_monomials({0: np.exp(s)}, grid), DiscreteSymbol.zero(grid))
    if a_zero:
        z = _function_samples(mat.b, "antidiagonal entry")
        c1, c2 = exp_antidiag(z)
        return MatrixSymbol(
            DiscreteSymbol.from_monomials({0: c1.astype(complex)}, grid),
            DiscreteSymbol.from_monomials({0: c2}, grid),
        )
    raise StructureError("symbol_exp accepts only diagonal or antidiagonal function symbols")


def matrix_values_2x2(mat: MatrixSymbol) -> np.ndarray:
    """Pointwise 2x2 values of a function matrix symbol, shape (n, 2, 2)."""
    v = mat.evaluate(np.array([0.0]))[..., 0]
    return np.moveaxis(v, -1, 0)
