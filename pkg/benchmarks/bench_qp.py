#!/usr/bin/env python3
"""Time the dispatch kernel's two backends on a fleet's full mode grid.

Both backends execute the identical statement order (plain loops, no
BLAS), so they must return bit-identical answers; the UCDKIT_NUMBA flag
only picks speed. This script measures the speed gap and re-checks the
bit equality on the way.

Usage: python3 benchmarks/bench_qp.py [--scenario NAME] [--repeats R]
"""

import argparse
import itertools
import time

import numpy as np

from ucdkit import assemble, load_bundled_scenario
from ucdkit._kernels import HAS_NUMBA, qp_core_numba, qp_core_numpy
from ucdkit.qp import FEAS_TOL, PIVOT_TOL


def assembled_batch(s):
    """Every (t, mode) pair as raw kernel arguments, infeasible ones
    included; the kernel certifies those too and that cost is part of
    what enumeration pays."""
    batch = []
    for t in range(1, s.horizon + 1):
        for bits in itertools.product((0, 1), repeat=s.n_units):
            q = assemble(s, t, bits)
            if q.n_free == 0:
                continue
            m = q.G.shape[0]
            C = np.empty((m + 1, q.n_free))
            b = np.empty(m + 1)
            C[0, :] = 1.0
            b[0] = q.beq
            C[1:, :] = -q.G
            b[1:] = -q.h
            batch.append((
                np.ascontiguousarray(q.hdiag), np.ascontiguousarray(q.glin),
                np.ascontiguousarray(C), np.ascontiguousarray(b),
                100 + 50 * (m + 1),
            ))
    return batch


def run_pass(kernel, batch):
    out = []
    for hdiag, glin, C, b, max_iter in batch:
        out.append(kernel(hdiag, glin, C, b, 1, FEAS_TOL, PIVOT_TOL, max_iter))
    return out


def best_pass_seconds(kernel, batch, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        run_pass(kernel, batch)
        best = min(best, time.perf_counter() - t0)
    return best


def identical(a, b):
    sa, xa, wa, ia, ba = a
    sb, xb, wb, ib, bb = b
    return (sa == sb and ia == ib and ba == bb
            and np.array_equal(xa, xb) and np.array_equal(wa, wb))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="example2_case1")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    s = load_bundled_scenario(args.scenario)
    batch = assembled_batch(s)
    print(f"scenario {args.scenario}: {len(batch)} assembled problems "
          f"({s.horizon} periods x {2 ** s.n_units} modes)")

    ref = run_pass(qp_core_numpy, batch)  # also warms any caches
    t_np = best_pass_seconds(qp_core_numpy, batch, args.repeats)
    print(f"backend numpy : {1e6 * t_np / len(batch):9.1f} us/solve "
          f"(best of {args.repeats})")

    if not HAS_NUMBA:
        print("backend numba : unavailable (numba not importable)")
        return

    got = run_pass(qp_core_numba, batch)  # first call pays compilation
    t_nb = best_pass_seconds(qp_core_numba, batch, args.repeats)
    print(f"backend numba : {1e6 * t_nb / len(batch):9.1f} us/solve "
          f"(best of {args.repeats})")
    print(f"speedup       : {t_np / t_nb:9.1f}x")

    same = all(identical(a, b) for a, b in zip(ref, got))
    print(f"bit-identical results: {'yes' if same else 'NO'}")
    if not same:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
