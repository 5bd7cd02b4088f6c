"""Numba vs numpy backends for the banded Bony-Weyl kernel.

Times the band build (symbol -> banded matrix) and the band apply (banded
matrix times a batch of coefficient vectors) for a second-order symbol with
three x-dependent monomials, as produced by the paralinearization.

    python3 benchmarks/bench_bw.py [--sizes 128 256 512 1024] [--batch 8] [--repeat 5]
"""

import argparse
import time

import numpy as np

from paradiff import _kernels
from paradiff.spectral import PeriodicGrid, SpectralField
from paradiff.symbols import DiscreteSymbol, chi_table, make_cutoff


def make_symbol(n, rng):
    g = PeriodicGrid(n)
    x = g.nodes
    coeffs = {}
    for k in (2, 1, 0):
        c = sum(rng.normal() * np.cos(j * x) + rng.normal() * np.sin(j * x) for j in range(1, 6))
        coeffs[k] = SpectralField.from_samples(c + 0j, g)
    return DiscreteSymbol.from_monomials(coeffs, g)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(n, batch, repeat, rng):
    chi_cut = make_cutoff(0.5)
    bw = chi_cut.bandwidth(n)
    chi = chi_table(n, chi_cut.delta, bw)
    coef, prof = make_symbol(n, rng).kernel_arrays()
    u = rng.normal(size=(batch, n)) + 1j * rng.normal(size=(batch, n))

    row = {"n": n, "bw": bw}
    bands = {}
    for name, flag in (("numpy", False), ("numba", True)):
        if flag and not _kernels.HAVE_NUMBA:
            continue
        # warm-up triggers compilation (or loads the on-disk cache)
        band = _kernels.band_build(coef, prof, chi, 1, bw, use_numba=flag)
        _kernels.band_apply(band, u, use_numba=flag)
        row[f"build_{name}"] = best_of(lambda: _kernels.band_build(coef, prof, chi, 1, bw, use_numba=flag), repeat)
        row[f"apply_{name}"] = best_of(lambda: _kernels.band_apply(band, u, use_numba=flag), repeat)
        bands[name] = (band, _kernels.band_apply(band, u, use_numba=flag))
    if len(bands) == 2:
        # relative to the largest entry: band values grow like xi^2
        row["max_diff"] = float(max(np.max(np.abs(bands["numpy"][i] - bands["numba"][i])) / np.max(np.abs(bands["numpy"][i]))
                                    for i in (0, 1)))
    return row


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024])
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    rng = np.random.default_rng(0)

    print(f"numba available: {_kernels.HAVE_NUMBA}")
    print(f"{'n':>6} {'bw':>5} {'build np':>10} {'build nb':>10} {'speedup':>8} {'apply np':>10} {'apply nb':>10} {'speedup':>8} {'rel diff':>9}")
    for n in args.sizes:
        r = bench(n, args.batch, args.repeat, rng)
        if "build_numba" in r:
            print(f"{n:6d} {r['bw']:5d} {r['build_numpy']*1e3:9.2f}ms {r['build_numba']*1e3:9.2f}ms "
                  f"{r['build_numpy']/r['build_numba']:7.1f}x {r['apply_numpy']*1e3:9.3f}ms {r['apply_numba']*1e3:9.3f}ms "
                  f"{r['apply_numpy']/r['apply_numba']:7.1f}x {r['max_diff']:9.1e}")
        else:
            print(f"{n:6d} {r['bw']:5d} {r['build_numpy']*1e3:9.2f}ms {'-':>10} {'-':>8} {r['apply_numpy']*1e3:9.3f}ms")


if __name__ == "__main__":
    main()
