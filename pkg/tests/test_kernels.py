import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paradiff import _kernels
from paradiff.symbols import chi_table, ones_table


def _inputs(n, terms, seed):
    rng = np.random.default_rng(seed)
    coef = rng.normal(size=(terms, n)) + 1j * rng.normal(size=(terms, n))
    prof = rng.normal(size=(terms, 4 * n + 1)) + 1j * rng.normal(size=(terms, 4 * n + 1))
    return coef, prof


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("n", [8, 32, 64])
@pytest.mark.parametrize("sigma2", [0, 1, 2])
def test_backends_agree_on_build(n, sigma2):
    coef, prof = _inputs(n, 3, n + sigma2)
    bw = n // 4
    chi = chi_table(n, 0.5, bw)
    a = _kernels.band_build(coef, prof, chi, sigma2, bw, use_numba=False)
    b = _kernels.band_build(coef, prof, chi, sigma2, bw, use_numba=True)
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")
@settings(max_examples=15, deadline=None)
@given(st.sampled_from([8, 16, 64]), st.integers(0, 1000), st.integers(1, 4))
def test_backends_agree_on_apply(n, seed, batch):
    rng = np.random.default_rng(seed)
    bw = n // 2 - 1
    band = rng.normal(size=(n, 2 * bw + 1)) + 1j * rng.normal(size=(n, 2 * bw + 1))
    u = rng.normal(size=(batch, n)) + 1j * rng.normal(size=(batch, n))
    a = _kernels.band_apply(band, u, use_numba=False)
    b = _kernels.band_apply(band, u, use_numba=True)
    np.testing.assert_allclose(a, b, atol=1e-11)


def test_apply_matches_dense():
    n, bw = 16, 5
    rng = np.random.default_rng(1)
    band = rng.normal(size=(n, 2 * bw + 1)) + 0j
    u = rng.normal(size=(2, 3, n)) + 0j
    dense = _kernels.band_to_dense(band)
    np.testing.assert_allclose(_kernels.band_apply(band, u), u @ dense.T, atol=1e-12)


def test_plain_table_gives_full_band():
    n = 8
    coef, prof = _inputs(n, 1, 0)
    band = _kernels.band_build(coef, prof, ones_table(n, n // 2 - 1), 2, n // 2 - 1, use_numba=False)
    dense = _kernels.band_to_dense(band)
    # entry (k, j) = coef[m] * prof[2j + 2n] for sigma = 1
    k, j = 5, 2
    m = k - j
    assert dense[k, j] == pytest.approx(coef[0, m + n // 2] * prof[0, 2 * (j - n // 2) + 2 * n])


@pytest.mark.parametrize("value, expected", [("0", "numpy"), ("off", "numpy"), ("false", "numpy"), ("1", None)])
def test_env_flag(monkeypatch, value, expected):
    monkeypatch.setenv("PARADIFF_NUMBA", value)
    got = _kernels.backend()
    if expected is None:
        expected = "numba" if _kernels.HAVE_NUMBA else "numpy"
    assert got == expected
