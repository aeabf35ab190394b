#!/usr/bin/env python3
"""Benchmark the jitted kernels against the pure-numpy fallback.

Runs the KDE grid evaluation at three sample sizes (the largest mirrors a
full calibration pass) and the convex clipping kernel on random box pairs,
timing both backends and checking they agree. Run from the repo root:

    python3 benchmarks/bench_kernels.py

Set GSDKIT_NO_NUMBA=1 to confirm the fallback selection (the numba column
then reports n/a).
"""

import time

import numpy as np

from gsdkit import kernels


def best_of(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def random_quads(rng, n):
    quads = np.empty((n, 4, 2))
    centres = rng.uniform(0, 60, (n, 2))
    widths = rng.uniform(2, 20, n)
    heights = rng.uniform(2, 20, n)
    thetas = rng.uniform(0, np.pi, n)
    base = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float) * 0.5
    for i in range(n):
        scaled = base * (widths[i], heights[i])
        c, s = np.cos(thetas[i]), np.sin(thetas[i])
        rot = np.array([[c, -s], [s, c]])
        quads[i] = scaled @ rot.T + centres[i]
    return quads


def bench_kde(rows):
    rng = np.random.default_rng(0)
    grid = np.linspace(0.0, 200.0, 512)
    for n in (1_000, 20_000, 125_977):
        values = rng.uniform(10.0, 180.0, n)
        weights = np.full(n, 1.0 / n)
        h = 3.5

        numpy_time = best_of(lambda: kernels._kde_grid_numpy(values, weights, h, grid))
        ref = kernels._kde_grid_numpy(values, weights, h, grid)
        if kernels.NUMBA_ENABLED:
            kernels._kde_grid_numba(values, weights, h, grid)  # warm
            numba_time = best_of(
                lambda: kernels._kde_grid_numba(values, weights, h, grid))
            got = kernels._kde_grid_numba(values, weights, h, grid)
            diff = float(np.max(np.abs(got - ref) / np.maximum(ref, 1e-300)))
            rows.append((f"kde grid n={n}", numpy_time, numba_time, diff))
        else:
            rows.append((f"kde grid n={n}", numpy_time, None, 0.0))


def bench_clip(rows):
    rng = np.random.default_rng(1)
    n = 20_000
    a = random_quads(rng, n)
    b = random_quads(rng, n)

    def run_py():
        acc = 0.0
        for i in range(n):
            acc += kernels._clip_area_py(a[i], b[i])
        return acc

    numpy_time = best_of(run_py, repeats=3)
    if kernels.NUMBA_ENABLED:
        kernels._clip_area_numba(a[0], b[0])  # warm

        def run_nb():
            acc = 0.0
            for i in range(n):
                acc += kernels._clip_area_numba(a[i], b[i])
            return acc

        numba_time = best_of(run_nb, repeats=3)
        worst = 0.0
        for i in range(0, n, 97):
            worst = max(worst, abs(kernels._clip_area_numba(a[i], b[i])
                                   - kernels._clip_area_py(a[i], b[i])))
        rows.append((f"quad clip x{n}", numpy_time, numba_time, worst))
    else:
        rows.append((f"quad clip x{n}", numpy_time, None, 0.0))


def main():
    print(f"backend selected by env: {kernels.backend_name()}")
    rows = []
    bench_kde(rows)
    bench_clip(rows)
    header = f"{'workload':<22} {'numpy':>10} {'numba':>10} {'speedup':>8} {'max diff':>10}"
    print(header)
    print("-" * len(header))
    for name, t_np, t_nb, diff in rows:
        if t_nb is None:
            print(f"{name:<22} {t_np * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>8} {'n/a':>10}")
        else:
            print(f"{name:<22} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms "
                  f"{t_np / t_nb:>7.1f}x {diff:>10.2e}")


if __name__ == "__main__":
    main()
