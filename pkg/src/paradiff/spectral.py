"""Periodic grid, Fourier coefficients, Sobolev norms and the doubled phase space.

Convention: u(x) = sum_j c_j exp(i j x) / sqrt(2 pi), so the constant 1 has
c_0 = sqrt(2 pi). Coefficient arrays are stored centered, index i <-> mode
i - n/2, i.e. modes run over [-n/2, n/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Mapping

import numpy as np

from .errors import ParameterError, PreconditionError, SizeError

SQRT2PI = math.sqrt(2.0 * math.pi)
MEAN_TOLERANCE = 1e-10


# ---------------------------------------------------------------------------
# raw array helpers (last axis is the mode / sample axis)


def to_coeffs(samples: np.ndarray) -> np.ndarray:
    """Grid samples -> centered coefficients."""
    samples = np.asarray(samples)
    n = samples.shape[-1]
    return np.fft.fftshift(np.fft.fft(samples, axis=-1), axes=-1) * (SQRT2PI / n)


def to_samples(coeffs: np.ndarray) -> np.ndarray:
    """Centered coefficients -> grid samples."""
    coeffs = np.asarray(coeffs)
    n = coeffs.shape[-1]
    return np.fft.ifft(np.fft.ifftshift(coeffs, axes=-1), axis=-1) * (n / SQRT2PI)


@lru_cache(maxsize=None)
def _modes(n: int) -> np.ndarray:
    m = np.arange(-n // 2, n // 2)
    m.flags.writeable = False
    return m


@lru_cache(maxsize=None)
def _reflect(n: int) -> np.ndarray:
    # index of mode -j; the Nyquist mode -n/2 is its own reflection (aliasing)
    r = (n - np.arange(n)) % n
    r.flags.writeable = False
    return r


@lru_cache(maxsize=None)
def _dmult(n: int) -> np.ndarray:
    d = 1j * _modes(n).astype(float)
    d[0] = 0.0  # Nyquist
    d.flags.writeable = False
    return d


def modes(n: int) -> np.ndarray:
    return _modes(n)


def reflect_index(n: int) -> np.ndarray:
    return _reflect(n)


def derivative_multiplier(n: int, order: int = 1) -> np.ndarray:
    """(ij)^order with the Nyquist entry zeroed (order 0 is the identity)."""
    if order == 0:
        return np.ones(n, dtype=complex)
    return _dmult(n) ** order


def xi_effective(n: int) -> np.ndarray:
    """Integer frequencies with the Nyquist mode mapped to 0."""
    k = _modes(n).astype(float)
    k[0] = 0.0
    return k


def d_coeffs(c: np.ndarray, order: int = 1) -> np.ndarray:
    return c * derivative_multiplier(c.shape[-1], order)


def d_samples(v: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral x-derivative of sampled values."""
    return to_samples(d_coeffs(to_coeffs(v), order))


def conj_reflect(c: np.ndarray) -> np.ndarray:
    """Coefficients of conj(u) given those of u."""
    return np.conj(c[..., _reflect(c.shape[-1])])


def sobolev_weights(n: int, s: float) -> np.ndarray:
    return (1.0 + _modes(n).astype(float) ** 2) ** s


def hs_norm(c: np.ndarray, s: float) -> float:
    c = np.asarray(c)
    return float(np.sqrt(np.sum(sobolev_weights(c.shape[-1], s) * np.abs(c) ** 2)))


def trig_eval(c: np.ndarray, y: np.ndarray, order: int = 0) -> np.ndarray:
    """Evaluate the trigonometric interpolant (or its derivative) at points y.

    The Nyquist mode is dropped so the interpolant is the same for real and
    complex data.
    """
    n = c.shape[-1]
    k = _modes(n)[1:].astype(float)
    ck = c[..., 1:] * (1j * k) ** order
    phase = np.exp(1j * np.outer(np.asarray(y, dtype=float), k))
    return (phase @ ck.T).T / SQRT2PI if ck.ndim > 1 else phase @ ck / SQRT2PI


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class PeriodicGrid:
    n_points: int

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 8 or (n & (n - 1)):
            raise ParameterError("n_points must be a power of two >= 8", n_points=n)

    @cached_property
    def nodes(self) -> np.ndarray:
        x = 2.0 * np.pi * np.arange(self.n_points) / self.n_points
        x.flags.writeable = False
        return x

    @property
    def modes(self) -> np.ndarray:
        return _modes(self.n_points)

    @property
    def n(self) -> int:
        return self.n_points


def _as_grid(grid) -> PeriodicGrid:
    return grid if isinstance(grid, PeriodicGrid) else PeriodicGrid(int(grid))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """A periodic complex function held by its centered Fourier coefficients."""

    grid: PeriodicGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n_points,):
            raise SizeError(
                "coefficient length does not match the grid",
                expected=self.grid.n_points,
                got=list(c.shape),
            )
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_samples(cls, samples, grid=None) -> "SpectralField":
        samples = np.asarray(samples)
        grid = _as_grid(grid if grid is not None else samples.shape[-1])
        if samples.shape != (grid.n_points,):
            raise SizeError("sample length does not match the grid", expected=grid.n_points, got=list(samples.shape))
        return cls(grid, to_coeffs(samples))

    @classmethod
    def zeros(cls, grid) -> "SpectralField":
        grid = _as_grid(grid)
        return cls(grid, np.zeros(grid.n_points, dtype=complex))

    @classmethod
    def constant(cls, grid, value: complex) -> "SpectralField":
        grid = _as_grid(grid)
        return cls.from_samples(np.full(grid.n_points, value, dtype=complex), grid)

    @classmethod
    def mode(cls, grid, k: int, amplitude: complex = 1.0) -> "SpectralField":
        """amplitude * exp(i k x) as a function (coefficient amplitude*sqrt(2 pi))."""
        grid = _as_grid(grid)
        c = np.zeros(grid.n_points, dtype=complex)
        c[k + grid.n_points // 2] = amplitude * SQRT2PI
        return cls(grid, c)

    @cached_property
    def samples(self) -> np.ndarray:
        v = to_samples(self.coeffs)
        v.flags.writeable = False
        return v

    @property
    def n(self) -> int:
        return self.grid.n_points

    def coeff(self, j: int) -> complex:
        return complex(self.coeffs[j + self.n // 2])

    def conj(self) -> "SpectralField":
        return SpectralField(self.grid, conj_reflect(self.coeffs))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def scale(self, c: complex) -> "SpectralField":
        return SpectralField(self.grid, c * self.coeffs)

    def to_json(self) -> dict:
        return {"n": self.n, "coeffs": [[float(z.real), float(z.imag)] for z in self.coeffs]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "SpectralField":
        grid = PeriodicGrid(int(obj["n"]))
        c = np.array([complex(re, im) for re, im in obj["coeffs"]])
        return cls(grid, c)


@dataclass(frozen=True, eq=False)
class DoubledState:
    """The pair (u+, u-) of the doubled phase space."""

    plus: SpectralField
    minus: SpectralField

    def __post_init__(self):
        if self.plus.n != self.minus.n:
            raise SizeError("components live on different grids", plus=self.plus.n, minus=self.minus.n)

    @classmethod
    def from_scalar(cls, u: SpectralField) -> "DoubledState":
        return cls(u, u.conj())

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "DoubledState":
        arr = np.asarray(arr)
        grid = PeriodicGrid(arr.shape[-1])
        return cls(SpectralField(grid, arr[0]), SpectralField(grid, arr[1]))

    @property
    def array(self) -> np.ndarray:
        return np.stack([self.plus.coeffs, self.minus.coeffs])

    @property
    def grid(self) -> PeriodicGrid:
        return self.plus.grid

    @property
    def n(self) -> int:
        return self.plus.n

    def to_json(self) -> dict:
        return {"plus": self.plus.to_json(), "minus": self.minus.to_json()}


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Real Fourier multiplier p(j) of the convolution potential."""

    coeffs: Mapping[int, float] = field(default_factory=dict)
    symmetric_flag: bool = True

    def __post_init__(self):
        clean = {}
        for j, v in dict(self.coeffs).items():
            v = complex(v)
            if abs(v.imag) > 0:
                raise ParameterError("potential coefficients must be real", mode=int(j), value=[v.real, v.imag])
            clean[int(j)] = float(v.real)
        if self.symmetric_flag:
            for j, v in clean.items():
                if clean.get(-j, 0.0) != v:
                    raise ParameterError("symmetric potential needs p(j) = p(-j)", mode=j)
        object.__setattr__(self, "coeffs", clean)

    def multiplier(self, n: int) -> np.ndarray:
        p = np.zeros(n)
        for j, v in self.coeffs.items():
            if -n // 2 <= j < n // 2:
                p[j + n // 2] = v
        return p

    def is_zero(self) -> bool:
        return not any(self.coeffs.values())

    def to_json(self) -> dict:
        return {"coeffs": {str(k): v for k, v in sorted(self.coeffs.items())}, "symmetric": self.symmetric_flag}

    @classmethod
    def from_json(cls, obj: Mapping | None) -> "PotentialSpec":
        if not obj:
            return cls()
        return cls({int(k): float(v) for k, v in obj.get("coeffs", {}).items()}, bool(obj.get("symmetric", True)))


ZERO_POTENTIAL = PotentialSpec()


# ---------------------------------------------------------------------------
# operations


def transform(data, direction: str = "forward", grid=None):
    """forward: samples -> SpectralField; inverse: SpectralField/coeffs -> samples."""
    if direction == "forward":
        return SpectralField.from_samples(data, grid)
    if direction == "inverse":
        if isinstance(data, SpectralField):
            return np.array(data.samples)
        data = np.asarray(data)
        if grid is not None and data.shape != (_as_grid(grid).n_points,):
            raise SizeError("coefficient length does not match the grid", expected=_as_grid(grid).n_points, got=list(data.shape))
        return to_samples(data)
    raise ParameterError("direction must be 'forward' or 'inverse'", direction=direction)


def sobolev_norm(u, s: float) -> float:
    c = u.coeffs if isinstance(u, SpectralField) else np.asarray(u)
    return hs_norm(c, s)


def spectral_derivative(u: SpectralField, order: int = 1) -> SpectralField:
    if not 0 <= order <= 4:
        raise ParameterError("derivative order must be in 0..4", order=order)
    return SpectralField(u.grid, d_coeffs(u.coeffs, order))


def antiderivative_coeffs(c: np.ndarray, tol: float = MEAN_TOLERANCE) -> np.ndarray:
    n = c.shape[-1]
    mean = abs(c[n // 2])
    if mean >= tol:
        raise PreconditionError("antiderivative needs a zero-mean field", mean_abs=float(mean), tolerance=tol)
    d = np.array(_dmult(n))
    out = np.zeros_like(c, dtype=complex)
    nz = d != 0
    out[nz] = c[nz] / d[nz]
    return out


def antiderivative_zero_mean(u: SpectralField, tol: float = MEAN_TOLERANCE) -> SpectralField:
    return SpectralField(u.grid, antiderivative_coeffs(u.coeffs, tol))


def lambda_multipliers(n: int, potential: PotentialSpec | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(lambda_j, lambda_{-j}) on the centered mode grid."""
    lam = (derivative_multiplier(n, 2)).real.copy()
    if potential is not None:
        lam = lam + potential.multiplier(n)
    return lam, lam[_reflect(n)]


def apply_lambda(state: DoubledState, potential: PotentialSpec | None = None) -> DoubledState:
    lam, lam_r = lambda_multipliers(state.n, potential)
    return DoubledState(
        SpectralField(state.grid, lam * state.plus.coeffs),
        SpectralField(state.grid, lam_r * state.minus.coeffs),
    )


@dataclass(frozen=True)
class SubspaceReport:
    which: str
    ok: bool
    violation: float


def subspace_violation(arr: np.ndarray, which: str) -> float:
    arr = np.asarray(arr)
    if which == "reality":
        return float(np.max(np.abs(arr[1] - conj_reflect(arr[0]))))
    if which == "parity":
        r = _reflect(arr.shape[-1])
        return float(max(np.max(np.abs(arr[0] - arr[0][r])), np.max(np.abs(arr[1] - arr[1][r]))))
    raise ParameterError("subspace must be 'reality' or 'parity'", which=which)


def check_subspace(state: DoubledState, which: str, tol: float = 1e-9) -> SubspaceReport:
    v = subspace_violation(state.array, which)
    return SubspaceReport(which, v <= tol, v)
