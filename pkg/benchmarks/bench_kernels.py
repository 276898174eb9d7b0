#!/usr/bin/env python3
"""Timing comparison of the compiled kernels against the pure-Python fallback.

Run from a checkout where the extension is built (pip install -e .):

    python benchmarks/bench_kernels.py [--iterations 200000] [--repeats 5]

Both backends produce identical outputs (asserted here before timing),
so the comparison is purely about speed.
"""

import argparse
import time

import numpy as np

from relicov import _kernels_py


def best_of(repeats, fn):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iterations", type=int, default=200_000, help="chain length")
    parser.add_argument("--observations", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--cdf-calls", type=int, default=20_000)
    args = parser.parse_args()

    try:
        from relicov import _kernels_c
    except ImportError:
        parser.error("compiled kernels are not built; run `pip install -e .` first")

    rng = np.random.default_rng(0)
    x = rng.standard_normal(args.observations)
    z = rng.standard_normal(args.iterations)
    u = rng.random(args.iterations)

    ref_chain, ref_accepts = _kernels_py.run_chain(x, z, u, 0.0, 0.5, 0.1)
    fast_chain, fast_accepts = _kernels_c.run_chain(x, z, u, 0.0, 0.5, 0.1)
    assert ref_accepts == fast_accepts and (ref_chain == fast_chain).all()

    beta_args = [
        (a, b, v)
        for a in (0.5, 2.5, 10.0, 60.0)
        for b in (0.5, 7.0)
        for v in np.linspace(0.01, 0.99, args.cdf_calls // 8)
    ]
    for a, b, v in beta_args[:: max(1, len(beta_args) // 200)]:
        assert _kernels_c.betainc_reg(a, b, v) == _kernels_py.betainc_reg(a, b, v)

    rows = []

    label = f"metropolis chain ({args.iterations} iters, k={args.observations})"
    t_py = best_of(args.repeats, lambda: _kernels_py.run_chain(x, z, u, 0.0, 0.5, 0.1))
    t_c = best_of(args.repeats, lambda: _kernels_c.run_chain(x, z, u, 0.0, 0.5, 0.1))
    rows.append((label, t_py, t_c))

    label = f"betainc_reg ({len(beta_args)} scalar calls)"
    t_py = best_of(
        args.repeats, lambda: [_kernels_py.betainc_reg(a, b, v) for a, b, v in beta_args]
    )
    t_c = best_of(
        args.repeats, lambda: [_kernels_c.betainc_reg(a, b, v) for a, b, v in beta_args]
    )
    rows.append((label, t_py, t_c))

    gamma_args = [
        (s, v) for s in (0.5, 4.0, 12.0, 50.0) for v in np.linspace(0.1, 150.0, args.cdf_calls // 4)
    ]
    label = f"gammainc_lower ({len(gamma_args)} scalar calls)"
    t_py = best_of(args.repeats, lambda: [_kernels_py.gammainc_lower(s, v) for s, v in gamma_args])
    t_c = best_of(args.repeats, lambda: [_kernels_c.gammainc_lower(s, v) for s, v in gamma_args])
    rows.append((label, t_py, t_c))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel'.ljust(width)}  {'python':>10}  {'compiled':>10}  {'speedup':>8}")
    for label, t_py, t_c in rows:
        print(f"{label.ljust(width)}  {t_py:>9.4f}s  {t_c:>9.4f}s  {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
