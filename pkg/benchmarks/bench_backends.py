#!/usr/bin/env python3
"""Benchmark the compiled accelerator against the numpy fallback.

Times the two hot kernels that dominate runtime: the O(n^2) pair
energy/gradient used inside descent, and the truncated field sum over
quadrature nodes used by window energies.  Run after building the
extension (pip install -e .); if the compiled module is missing only the
fallback column is shown.
"""

import time

import numpy as np

from rieszgas import _accel_np

try:
    from rieszgas import _accel
except ImportError:
    _accel = None


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def row(label, args, attr):
    py = timeit(getattr(_accel_np, attr), *args)
    if _accel is None:
        print(f"{label:<44} {py * 1e3:9.2f} ms {'-':>12} {'-':>9}")
        return
    cy = timeit(getattr(_accel, attr), *args)
    print(f"{label:<44} {py * 1e3:9.2f} ms {cy * 1e3:9.2f} ms "
          f"{py / cy:8.1f}x")


def main():
    rng = np.random.default_rng(0)
    print(f"{'kernel':<44} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for n in (128, 512, 1024):
        pts = rng.uniform(-1, 1, (n, 2))
        row(f"pair_energy        n={n:<5} (log)", (pts, 0.0, True),
            "pair_energy")
        row(f"pair_gradient      n={n:<5} (log)", (pts, 0.0, True),
            "pair_gradient")
    pts = rng.uniform(-1, 1, (512, 2))
    for m in (2000, 8000):
        nodes = rng.uniform(-1, 1, (m, 2))
        row(f"field_sum_trunc    {m}x512 (k=0)", (nodes, pts, 0.2, 0.0, True),
            "field_sum_trunc")
        nodes3 = rng.uniform(-1, 1, (m, 3))
        row(f"field_sum_trunc    {m}x512 (k=1)", (nodes3, pts, 0.2, 0.5, False),
            "field_sum_trunc")
    pts1 = np.sort(rng.uniform(-1, 1, (800, 1)), axis=0)
    row("min_separation     n=800", (pts1,), "min_separation")


if __name__ == "__main__":
    main()
