"""Time the numba and pure-numpy paths of the hot kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat R]

Both paths are imported side by side from ``sto_lab._kernels.KERNELS``, so
the STO_LAB_PURE_NUMPY switch is not needed here.  The first numba call is
a compile/warm-up and is excluded.
"""
import argparse
import timeit

import numpy as np

from sto_lab._kernels import KERNELS


def cases(rng):
    N = 64
    x = (np.arange(8 * 3 * N) + 0.5) / (8 * 3 * N)
    phase = 2 * x + 0.05 * np.sin(2 * np.pi * x) / (2 * np.pi)
    particles = rng.uniform(size=100_000)
    coeffs = rng.standard_normal(2 * 8 + 1) + 1j * rng.standard_normal(2 * 8 + 1)
    coeffs = 0.5 * (coeffs + np.conj(coeffs[::-1]))
    return {
        "oscillatory_matrix": (x, phase, N, 2 * N),
        "empirical_moments": (particles, 64),
        "trig_eval": (coeffs, particles),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':22s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s} {'max diff':>10s}")
    for name, call_args in cases(rng).items():
        f_np, f_nb = KERNELS[name]
        a, b = f_np(*call_args), f_nb(*call_args)  # warm-up and cross-check
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        t_np = min(timeit.repeat(lambda: f_np(*call_args), number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: f_nb(*call_args), number=1, repeat=args.repeat))
        print(f"{name:22s} {1e3 * t_np:12.2f} {1e3 * t_nb:12.2f} {t_np / t_nb:8.2f} {diff:10.2e}")


if __name__ == "__main__":
    main()
