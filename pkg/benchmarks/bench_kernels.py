"""Time the numba and numpy kernels on the workloads the engine actually runs.

    python3 benchmarks/bench_kernels.py [--repeat N]

The first numba call includes JIT compilation (cached on disk afterwards), so
it is reported separately from the steady-state timings.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from cdc_incent import auction, kernels
from cdc_incent.model import ValuationDistribution


def _timed(fn, repeat):
    start = time.perf_counter()
    out = fn()
    first = time.perf_counter() - start
    best = first
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return out, first, best


def workloads():
    dist = ValuationDistribution.uniform()
    x, d, c = dist.knots()
    grid = np.linspace(0.0, 1.0, 512)
    for I in (5, 10, 15):
        rewards = auction.make_reward_schedule("arithmetic", 4, 1.0, 0.05)
        coef = auction._score_coefficients(rewards, I)
        yield f"score_increments I={I}", (lambda m, coef=coef: m.score_increments(grid, x, d, c, coef, 1e-10, 40))
    rng = np.random.default_rng(0)
    p = 2**31 - 1
    for n in (8, 64, 128):
        A = rng.integers(0, p, size=(n, n), dtype=np.int64)
        B = rng.integers(0, p, size=(n, n), dtype=np.int64)
        yield f"modmatmul {n}x{n}", (lambda m, A=A, B=B: m.modmatmul(A, B, p))


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    impls = kernels.backends()
    if "numba" not in impls:
        print("numba is not installed; only the numpy kernels are timed")
    print(f"{'workload':<24}{'backend':<8}{'first [ms]':>12}{'best [ms]':>12}  agrees")
    for name, call in workloads():
        ref = None
        for backend, mod in impls.items():
            out, first, best = _timed(lambda: call(mod), args.repeat)
            value = out[0] if isinstance(out, tuple) else out
            if ref is None:
                ref, same = value, "-"
            elif value.dtype.kind == "i":
                same = "exact" if np.array_equal(value, ref) else "NO"
            else:
                same = f"{np.max(np.abs(value - ref)):.1e}"
            print(f"{name:<24}{backend:<8}{first * 1e3:>12.2f}{best * 1e3:>12.3f}  {same}")


if __name__ == "__main__":
    main()
