#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --sizes 500 1000 --threads 4
    python benchmarks/bench_kernels.py --pipeline

Kernel timings run both backend modules in-process; --pipeline times a
full re-ranking run per backend in subprocesses (the backend is chosen at
import time via RANKFLOW_PURE_PYTHON).
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rankflow import _purepath  # noqa: E402

try:
    from rankflow import _fastpath
except ImportError:
    _fastpath = None


def synthetic_csr(rng, n, row_nnz):
    """Random nonnegative CSR with ~row_nnz entries per row."""
    indptr = np.zeros(n + 1, dtype=np.int64)
    cols, vals = [], []
    for i in range(n):
        m = int(rng.integers(max(1, row_nnz // 2), row_nnz * 2))
        c = np.unique(rng.integers(0, n, m))
        cols.append(c.astype(np.int64))
        vals.append(rng.random(c.shape[0]))
        indptr[i + 1] = indptr[i] + c.shape[0]
    return indptr, np.concatenate(cols), np.concatenate(vals)


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(sizes, row_nnz, repeats, threads):
    rng = np.random.default_rng(0)
    header = f"{'kernel':<12} {'n':>6} {'nnz/row':>8} {'python':>10} " \
             f"{'compiled':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        indptr, indices, data = synthetic_csr(rng, n, row_nnz)
        args = (indptr, indices, data, indptr, indices, data, n, n)

        t_py = timeit(lambda: _purepath.csr_matmul(*args), repeats)
        if _fastpath is not None:
            t_cy = timeit(
                lambda: _fastpath.csr_matmul(*args, None, threads), repeats)
            ratio = f"{t_py / t_cy:7.1f}x"
            cy_txt = f"{t_cy * 1e3:9.1f}ms"
        else:
            cy_txt, ratio = "n/a", ""
        print(f"{'csr_matmul':<12} {n:>6} {row_nnz:>8} "
              f"{t_py * 1e3:9.1f}ms {cy_txt:>10} {ratio:>8}")

        m = 50 * n
        left = np.sort(rng.integers(0, n, m)).astype(np.int64)
        right = rng.integers(0, n, m).astype(np.int64)
        t_py = timeit(
            lambda: _purepath.pair_dots(indptr, indices, data,
                                        left, right, n), repeats)
        if _fastpath is not None:
            t_cy = timeit(
                lambda: _fastpath.pair_dots(indptr, indices, data,
                                            left, right, n, threads),
                repeats)
            ratio = f"{t_py / t_cy:7.1f}x"
            cy_txt = f"{t_cy * 1e3:9.1f}ms"
        else:
            cy_txt, ratio = "n/a", ""
        print(f"{'pair_dots':<12} {n:>6} {row_nnz:>8} "
              f"{t_py * 1e3:9.1f}ms {cy_txt:>10} {ratio:>8}")


PIPELINE_SNIPPET = """
import time
import numpy as np
import rankflow
from rankflow import build_ranked_lists, run_rfe, RfeConfig, truncate

rng = np.random.default_rng(7)
centers = rng.normal(0.0, 1.0, size=(10, 16))
feats = np.concatenate([
    c + 0.85 * rng.normal(0.0, 1.0, size=(100, 16)) for c in centers])
aa = np.add.reduce(feats * feats, axis=1)
sq = aa[:, None] + aa[None, :] - 2.0 * (feats @ feats.T)
np.maximum(sq, 0.0, out=sq)
dist = np.sqrt(sq)
np.fill_diagonal(dist, 0.0)
lists = truncate(build_ranked_lists(dist, depth=1000), 200)
t0 = time.time()
run_rfe(lists, RfeConfig(k=100, depth=200))
print(f"{rankflow.kernel_backend}: {time.time() - t0:.2f}s")
"""


def bench_pipeline():
    print("\nfull pipeline (n=1000, k=100, L=200, T=2):", flush=True)
    for force in ("0", "1"):
        env = dict(os.environ, RANKFLOW_PURE_PYTHON=force)
        subprocess.run([sys.executable, "-c", PIPELINE_SNIPPET], env=env,
                       check=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[200, 500, 1000])
    parser.add_argument("--row-nnz", type=int, default=100)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--pipeline", action="store_true",
                        help="also time a full re-ranking run per backend")
    args = parser.parse_args()

    if _fastpath is None:
        print("note: compiled kernels unavailable, timing the fallback only")
    bench_kernels(args.sizes, args.row_nnz, args.repeats, args.threads)
    if args.pipeline:
        bench_pipeline()


if __name__ == "__main__":
    main()
