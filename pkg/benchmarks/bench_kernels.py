#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from pinchflow import _kernels_np as knp
from pinchflow.gridflow import build_torus

try:
    from pinchflow import _kernels as kcy
except ImportError:
    kcy = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = []

    A = rng.standard_normal((50_000, 5, 5, 2))
    A = (A + A.transpose(0, 2, 1, 3)) / 2
    cases.append(("pinch_quantities  (5e4, n=5, k=2)",
                  lambda m: m.pinch_quantities(A)))

    S = rng.standard_normal((20_000, 5, 5, 5, 2))
    cases.append(("gradient_quantities (2e4, n=5, k=2)",
                  lambda m: m.gradient_quantities(S)))

    F64 = build_torus(1.0, 2.0, 64, 2).F
    cases.append(("grid_geometry_core (N=64)",
                  lambda m: m.grid_geometry_core(F64, 4)))

    F256 = build_torus(1.0, 2.0, 256, 2).F
    cases.append(("grid_geometry_core (N=256)",
                  lambda m: m.grid_geometry_core(F256, 4)))

    print(f"{'kernel':40s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}")
    for name, fn in cases:
        t_np = best_of(lambda: fn(knp), args.repeat)
        if kcy is None:
            print(f"{name:40s} {t_np * 1e3:9.2f}ms {'n/a':>10s} {'-':>8s}")
            continue
        t_cy = best_of(lambda: fn(kcy), args.repeat)
        print(f"{name:40s} {t_np * 1e3:9.2f}ms {t_cy * 1e3:9.2f}ms "
              f"{t_np / t_cy:7.1f}x")

    if kcy is None:
        print("\ncompiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
