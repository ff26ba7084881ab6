#!/usr/bin/env python3
"""Benchmark the exhaustive-verification counting kernel: numba vs numpy.

Usage: python benchmarks/bench_kernels.py [--rows 200] [--n 60] [--width 10]
       [--batches 40] [--chunk 8192]

The workload mirrors committee verification: count, for each candidate fault
set B, how many of `rows` membership rows intersect B in at least `threshold`
elements. Set COINFORGE_NO_NUMBA=1 to confirm the fallback path selects.
"""

import argparse
import random
import time

import numpy as np

from coinforge import _kernels
from coinforge._kernels import (
    _rows_meeting_threshold_numpy,
    active_backend,
    membership_matrix,
)


def build(args):
    rng = random.Random(7)
    rows = [tuple(sorted(rng.sample(range(args.n), args.n // 3))) for _ in range(args.rows)]
    member = membership_matrix(rows, args.n)
    batches = [
        np.array([[rng.randrange(args.n) for _ in range(args.width)]
                  for _ in range(args.chunk)], dtype=np.int64)
        for _ in range(args.batches)
    ]
    return member, batches


def time_fn(fn, member, batches, threshold):
    fn(member, batches[0], threshold)  # warm-up / JIT
    t0 = time.perf_counter()
    acc = 0
    for b in batches:
        acc += int(fn(member, b, threshold).sum())
    return time.perf_counter() - t0, acc


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=200)
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--width", type=int, default=10)
    ap.add_argument("--batches", type=int, default=40)
    ap.add_argument("--chunk", type=int, default=8192)
    args = ap.parse_args()

    member, batches = build(args)
    threshold = args.width / 3.0
    checks = args.rows * args.chunk * args.batches

    results = {}
    np_time, np_acc = time_fn(_rows_meeting_threshold_numpy, member, batches, threshold)
    results["numpy"] = np_time
    if _kernels._HAVE_NUMBA:
        nb_time, nb_acc = time_fn(_kernels._rows_meeting_threshold_numba, member, batches, threshold)
        assert nb_acc == np_acc, "backends disagree"
        results["numba"] = nb_time

    print(f"active backend: {active_backend()}   "
          f"workload: {checks / 1e6:.1f}M membership checks")
    for name, t in results.items():
        print(f"  {name:<6} {t:8.3f}s   {checks / t / 1e6:9.1f}M checks/s")
    if len(results) == 2:
        print(f"  speedup numba/numpy: {results['numpy'] / results['numba']:.2f}x")


if __name__ == "__main__":
    main()
