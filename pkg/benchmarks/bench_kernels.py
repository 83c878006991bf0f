#!/usr/bin/env python3
"""Timing comparison of the pure-numpy and compiled kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from fruitsize import kernels


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_sphere_stats(backend, n, repeats):
    rng = np.random.default_rng(0)
    xyz = np.ascontiguousarray(rng.uniform(-30, 30, (n, 3)))
    return timeit(lambda: backend.sphere_inlier_stats(xyz, 1.0, -2.0, 3.0,
                                                      20.0, 1.0), repeats)


def bench_mvee(backend, n, repeats):
    rng = np.random.default_rng(1)
    xyz = np.ascontiguousarray(rng.uniform(-30, 30, (n, 3)))
    return timeit(lambda: backend.mvee_weights(xyz, 1e-6, 100000), repeats)


def bench_raycast(backend, nf, repeats):
    rng = np.random.default_rng(2)
    centers = np.column_stack([rng.uniform(-80, 80, nf),
                               rng.uniform(-60, 60, nf),
                               rng.uniform(600, 1200, nf)])
    semi = rng.uniform(10, 30, (nf, 3))
    origins = np.ascontiguousarray(-centers)
    rot_t = np.ascontiguousarray(np.stack([np.eye(3)] * nf))
    inv_sq = np.ascontiguousarray(1.0 / semi**2)
    c_coeff = np.ascontiguousarray(np.sum(inv_sq * origins**2, axis=1) - 1.0)
    return timeit(lambda: backend.raycast_depth(
        640, 480, 600.0, 600.0, 320.0, 240.0, origins, rot_t, inv_sq,
        c_coeff), repeats)


CASES = [
    ("sphere_inlier_stats n=1e4", bench_sphere_stats, 10_000),
    ("sphere_inlier_stats n=1e5", bench_sphere_stats, 100_000),
    ("mvee_weights n=500", bench_mvee, 500),
    ("mvee_weights n=5000", bench_mvee, 5_000),
    ("raycast 640x480, 3 fruit", bench_raycast, 3),
    ("raycast 640x480, 20 fruit", bench_raycast, 20),
]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    names = kernels.available_backends()
    backends = {name: kernels.get_backend(name) for name in names}
    print(f"backends: {', '.join(names)} (active: {kernels.BACKEND})\n")
    width = max(len(c[0]) for c in CASES)
    header = f"{'kernel case':<{width}}  " + "  ".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, fn, size in CASES:
        times = [fn(backends[n], size, args.repeats) for n in names]
        row = f"{label:<{width}}  " + "  ".join(f"{t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2 and times[1] > 0:
            row += f"  {times[0] / times[1]:>7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
