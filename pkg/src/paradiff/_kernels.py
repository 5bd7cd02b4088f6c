"""Banded Bony-Weyl double-sum kernels.

Two backends with identical semantics:

* numba ``@njit`` loops (default when numba imports)
* vectorised numpy (``PARADIFF_NUMBA=0``, or numba missing)

Band layout: ``band[k_idx, m + bw]`` is the matrix entry from input mode
``j = k - m`` to output mode ``k`` (centered indices, ``k_idx = k + n/2``).
Entry value::

    chi[m + bw, g] * sum_t coef[t, m + n/2] * prof[t, g],   g = 2k - sigma2*m + 2n

where ``sigma2 = 2*sigma`` selects the frequency argument xi = k - sigma*m.
"""

from __future__ import annotations

import os

import numpy as np


def _flag() -> bool:
    return os.environ.get("PARADIFF_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# numpy backend


def band_build_numpy(coef, prof, chi, sigma2, bw):
    T, n = coef.shape
    band = np.zeros((n, 2 * bw + 1), dtype=np.complex128)
    kidx = np.arange(n)
    k = kidx - n // 2
    for m in range(-bw, bw + 1):
        if abs(m) >= n // 2:
            continue
        valid = (kidx - m >= 0) & (kidx - m < n)
        g = 2 * k[valid] - sigma2 * m + 2 * n
        band[valid, m + bw] = chi[m + bw, g] * (coef[:, m + n // 2] @ prof[:, g])
    return band


def band_apply_numpy(band, u):
    """u has shape (B, n); returns (B, n)."""
    n, w = band.shape
    bw = (w - 1) // 2
    out = np.zeros(u.shape, dtype=np.complex128)
    for m in range(-bw, bw + 1):
        if m >= 0:
            out[:, m:] += band[m:, m + bw] * u[:, : n - m]
        else:
            out[:, :m] += band[:m, m + bw] * u[:, -m:]
    return out


# ---------------------------------------------------------------------------
# numba backend

if HAVE_NUMBA:

    @numba.njit(cache=True)
    def band_build_numba(coef, prof, chi, sigma2, bw):
        T, n = coef.shape
        h = n // 2
        band = np.zeros((n, 2 * bw + 1), dtype=np.complex128)
        for kidx in range(n):
            k = kidx - h
            for m in range(-bw, bw + 1):
                j = kidx - m
                if j < 0 or j >= n or m >= h or m <= -h:
                    continue
                g = 2 * k - sigma2 * m + 2 * n
                acc = 0j
                for t in range(T):
                    acc += coef[t, m + h] * prof[t, g]
                band[kidx, m + bw] = chi[m + bw, g] * acc
        return band

    @numba.njit(cache=True)
    def band_apply_numba(band, u):
        n, w = band.shape
        bw = (w - 1) // 2
        B = u.shape[0]
        out = np.zeros((B, n), dtype=np.complex128)
        for b in range(B):
            for kidx in range(n):
                lo = max(-bw, kidx - n + 1)
                hi = min(bw, kidx)
                acc = 0j
                for m in range(lo, hi + 1):
                    acc += band[kidx, m + bw] * u[b, kidx - m]
                out[b, kidx] = acc
        return out

else:  # pragma: no cover
    band_build_numba = band_build_numpy
    band_apply_numba = band_apply_numpy


def backend() -> str:
    return "numba" if (HAVE_NUMBA and _flag()) else "numpy"


def band_build(coef, prof, chi, sigma2: int, bw: int, use_numba: bool | None = None) -> np.ndarray:
    coef = np.ascontiguousarray(coef, dtype=np.complex128)
    prof = np.ascontiguousarray(prof, dtype=np.complex128)
    chi = np.ascontiguousarray(chi, dtype=np.complex128)
    if use_numba is None:
        use_numba = backend() == "numba"
    fn = band_build_numba if use_numba else band_build_numpy
    return fn(coef, prof, chi, int(sigma2), int(bw))


def band_apply(band, u, use_numba: bool | None = None) -> np.ndarray:
    """Apply the banded operator along the last axis of u (any leading shape)."""
    u = np.asarray(u)
    lead = u.shape[:-1]
    u2 = np.ascontiguousarray(u.reshape(-1, u.shape[-1]), dtype=np.complex128)
    if use_numba is None:
        use_numba = backend() == "numba"
    fn = band_apply_numba if use_numba else band_apply_numpy
    return fn(np.ascontiguousarray(band), u2).reshape(lead + (u.shape[-1],))


def band_to_dense(band) -> np.ndarray:
    n, w = band.shape
    bw = (w - 1) // 2
    M = np.zeros((n, n), dtype=np.complex128)
    k = np.arange(n)
    for m in range(-bw, bw + 1):
        valid = (k - m >= 0) & (k - m < n)
        M[k[valid], k[valid] - m] = band[valid, m + bw]
    return M
