#!/usr/bin/env python3
"""Benchmark the jitted kernels against the pure-numpy fallback.

Runs both paths in-process (the fallback implementations are importable
directly) and reports wall time per call. The jitted path is warmed up
before timing so compilation is excluded.

    python benchmarks/bench_kernels.py
    IC_MAPPER_NUMBA=0 python benchmarks/bench_kernels.py   # numpy-only build
"""
import time

import numpy as np

from icmap import _kernels


def timeit(fn, *args, repeat=5):
    fn(*args)  # warm-up (and JIT compile)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def fmt(seconds):
    return f"{seconds * 1e3:9.2f} ms"


def main():
    rng = np.random.default_rng(0)
    print(f"numba path enabled: {_kernels.NUMBA_ENABLED}")
    print()
    print(f"{'kernel':<34}{'active':>14}{'numpy':>14}{'speedup':>9}")
    print("-" * 71)

    for n, m in ((2_000, 2_000), (5_000, 5_000)):
        a = rng.uniform(-100, 100, (n, 2))
        b = rng.uniform(-100, 100, (m, 2))
        t_active = timeit(_kernels.nn_mean_dist, a, b)
        t_numpy = timeit(_kernels._nn_mean_numpy, a, b)
        print(f"{f'nn_mean_dist {n}x{m}':<34}{fmt(t_active):>14}{fmt(t_numpy):>14}"
              f"{t_numpy / t_active:>8.1f}x")

    ring = np.array([[0.0, 0.0], [8.0, 1.0], [10.0, 7.0], [4.0, 10.0], [-1.0, 5.0]])
    for res in (500, 1000):
        xs = np.linspace(-2, 11, res)
        ys = np.linspace(-1, 11, res)
        t_active = timeit(_kernels.inside_mask, xs, ys, ring)
        t_numpy = timeit(_kernels._inside_mask_numpy, xs, ys, ring)
        print(f"{f'inside_mask {res}x{res} grid':<34}{fmt(t_active):>14}{fmt(t_numpy):>14}"
              f"{t_numpy / t_active:>8.1f}x")


if __name__ == "__main__":
    main()
