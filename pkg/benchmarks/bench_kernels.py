#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot kernels (sampled ring values, completion gradient,
directional derivative) on completion-scale workloads and prints the
speedups. The numba path is warmed up first so JIT compilation is not
counted.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from trman import tr
from trman.kernels import numba_backend, numpy_backend

CASES = [
    # label, dims, ranks, samples
    ("d=3 r=2 n=50  m=5000", (50, 50, 50), (2, 2, 2), 5_000),
    ("d=3 r=2 n=100 m=30000", (100, 100, 100), (2, 2, 2), 30_000),
    ("d=3 r=2 n=200 m=100000", (200, 200, 200), (2, 2, 2), 100_000),
    ("d=5 r=3 n=30  m=20000", (30,) * 5, (3,) * 5, 20_000),
]


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'case':26s} {'kernel':10s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for label, dims, ranks, m in CASES:
        u = tr.random_cores(dims, ranks, seed=args.seed)
        pack = u.pack()
        idx = np.stack([rng.integers(0, n, size=m) for n in dims], axis=1).astype(np.int64)
        resid = rng.standard_normal(m)
        tangent = rng.standard_normal(pack.data.shape[0])
        base = (pack.data, pack.offsets, pack.ranks, pack.dims, idx)

        kernels = {
            "values": (
                lambda: numba_backend.sampled_values(*base),
                lambda: numpy_backend.sampled_values(*base),
            ),
            "gradient": (
                lambda: numba_backend.completion_gradient(*base, resid),
                lambda: numpy_backend.completion_gradient(*base, resid),
            ),
            "dirderiv": (
                lambda: numba_backend.sampled_dirderiv(pack.data, tangent, *base[1:]),
                lambda: numpy_backend.sampled_dirderiv(pack.data, tangent, *base[1:]),
            ),
        }
        for name, (nb, npf) in kernels.items():
            nb()  # JIT warmup
            got_nb = nb()
            got_np = npf()
            assert np.allclose(got_nb, got_np, rtol=1e-10), f"backend mismatch in {name}"
            t_nb = best_of(nb, args.repeat)
            t_np = best_of(npf, args.repeat)
            print(
                f"{label:26s} {name:10s} {t_nb * 1e3:9.2f}ms {t_np * 1e3:9.2f}ms "
                f"{t_np / t_nb:7.1f}x"
            )


if __name__ == "__main__":
    main()
