"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 50] [--steps 2000]

The per-kernel timings call both implementations directly. The end-to-end
timing runs one replicate per backend in a subprocess, since the backend is
chosen once at import (HYBRIDSWARM_PURE_PYTHON=1 forces the fallback).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hybridswarm import _pykernels

try:
    from hybridswarm import _ckernels
except ImportError:
    _ckernels = None

REPLICATE = """
import time
from hybridswarm import BACKEND, from_flat, run_replicate
cfg = from_flat({{"policy": "hybrid", "duration": {steps}, "replicates": 1}})
t0 = time.perf_counter()
run_replicate(cfg, 1)
print(BACKEND, time.perf_counter() - t0)
"""


def cases(rng):
    agents = rng.uniform(0, 100, (25, 2))
    events = rng.uniform(0, 100, (40, 2))
    grid = np.stack(np.meshgrid(np.arange(101.0), np.arange(101.0), indexing="ij"), -1).reshape(-1, 2)
    members = rng.uniform(35, 65, (12, 2))
    return {
        "within_radius": lambda k: k.within_radius(agents, events, 5.0),
        "pairs_within": lambda k: k.pairs_within(agents, 10.0),
        "count_within": lambda k: k.count_within(grid, events, 5.0),
        "annulus_mask": lambda k: k.annulus_mask(grid, members, 5.0, 10.0),
        "union_cells": lambda k: k.union_cells(members, 5.0, 100.0, 100.0, 1.0),
    }


def replicate_time(steps: int, pure: bool):
    env = dict(os.environ)
    if pure:
        env["HYBRIDSWARM_PURE_PYTHON"] = "1"
    else:
        env.pop("HYBRIDSWARM_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", REPLICATE.format(steps=steps)],
                         env=env, capture_output=True, text=True, check=True)
    backend, secs = out.stdout.split()
    return backend, float(secs)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    print(f"{'kernel':16s} {'numpy (us)':>12s} {'cython (us)':>12s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        py = min(timeit.repeat(lambda: fn(_pykernels), number=args.repeat, repeat=3)) / args.repeat
        if _ckernels is None:
            print(f"{name:16s} {py * 1e6:12.1f} {'n/a':>12s}")
            continue
        cy = min(timeit.repeat(lambda: fn(_ckernels), number=args.repeat, repeat=3)) / args.repeat
        print(f"{name:16s} {py * 1e6:12.1f} {cy * 1e6:12.1f} {py / cy:8.1f}x")

    print(f"\nfull replicate, {args.steps} steps, 25 agents, hybrid:")
    results = {}
    for pure in (True, False):
        backend, secs = replicate_time(args.steps, pure)
        results[backend] = secs
        print(f"  {backend:8s} {secs:8.2f} s  ({secs / args.steps * 1e3:.3f} ms/step)")
    if len(results) == 2:
        print(f"  speedup  {results['python'] / results['cython']:.2f}x")


if __name__ == "__main__":
    main()
