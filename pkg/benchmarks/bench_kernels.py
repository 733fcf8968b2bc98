#!/usr/bin/env python3
"""Throughput comparison of the walk-kernel backends.

Times the compiled Cython kernel against the pure-numpy fallback on the
shapes the simulators actually produce: one long path, a wide ensemble
batch, and many short per-trajectory calls.  Also asserts that the two
backends agree bit for bit on every workload.

Usage:
    python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import sys
import time

import numpy as np

from reset_sde._kernels import _walk_py

try:
    from reset_sde._kernels import _walk as _walk_c
except ImportError:
    _walk_c = None


def make_case(rng, n_paths, n_steps, reset_prob=0.02):
    dw = rng.standard_normal((n_paths, n_steps))
    flags = (rng.random((n_paths, n_steps)) < reset_prob).astype(np.uint8)
    return dw, flags


def run_batch(impl, dw, flags, out):
    impl.resetting_walk_batch(0.0, 1.0, dw, flags, out)


def run_loop(impl, dw, flags, out):
    for i in range(dw.shape[0]):
        impl.resetting_walk(0.0, 1.0, dw[i], flags[i], out[i])


def best_time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    cases = [
        ("long path      (1 x 1e6, batch)", make_case(rng, 1, 1_000_000), run_batch),
        ("ensemble batch (512 x 2048)", make_case(rng, 512, 2048), run_batch),
        ("short calls    (2000 x 256, loop)", make_case(rng, 2000, 256), run_loop),
    ]

    print(f"{'case':<36}{'numpy':>12}{'compiled':>12}{'speedup':>10}")
    for name, (dw, flags), runner in cases:
        steps = dw.size
        out_py = np.empty((dw.shape[0], dw.shape[1] + 1))
        t_py = best_time(lambda: runner(_walk_py, dw, flags, out_py), args.repeats)
        row = f"{name:<36}{t_py * 1e9 / steps:>10.2f} ns"
        if _walk_c is not None:
            out_c = np.empty_like(out_py)
            t_c = best_time(lambda: runner(_walk_c, dw, flags, out_c), args.repeats)
            if not np.array_equal(out_py, out_c):
                print("backend outputs differ!", file=sys.stderr)
                return 1
            row += f"{t_c * 1e9 / steps:>10.2f} ns{t_py / t_c:>9.1f}x"
        else:
            row += f"{'not built':>12}{'-':>10}"
        print(row)
    if _walk_c is None:
        print("\ncompiled kernel unavailable; build it with "
              "`python setup.py build_ext --inplace`")
    return 0


if __name__ == "__main__":
    sys.exit(main())
