"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set RANKFLOW_PURE_PYTHON=1 to force the fallback, RANKFLOW_THREADS=<n> to
change the default thread count used by the compiled kernels (the fallback
is serial regardless). Index-only transformations (transpose, COO
coalescing) are implemented once here in numpy: they involve no floating
point accumulation, so there is nothing to gain from compiling them.
"""

from __future__ import annotations

import os

import numpy as np

from .ranking import SparseScores

if os.environ.get("RANKFLOW_PURE_PYTHON") == "1":
    from . import _purepath as _impl
else:
    try:
        from . import _fastpath as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _purepath as _impl

BACKEND = _impl.BACKEND

__all__ = [
    "BACKEND",
    "default_threads",
    "matmul",
    "matmul_raw",
    "pair_dots",
    "transpose",
    "transpose_raw",
    "coalesce_coo",
]


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("RANKFLOW_THREADS", "1")))
    except ValueError:
        return 1


def _as_i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _as_f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def matmul_raw(a_indptr, a_indices, a_data,
               b_indptr, b_indices, b_data,
               n_rows: int, n_cols: int,
               mid=None, threads: int | None = None):
    """Raw-CSR product A @ diag(mid) @ B -> (indptr, indices, data)."""
    if threads is None:
        threads = default_threads()
    mid_arr = None if mid is None else _as_f64(mid)
    return _impl.csr_matmul(
        _as_i64(a_indptr), _as_i64(a_indices), _as_f64(a_data),
        _as_i64(b_indptr), _as_i64(b_indices), _as_f64(b_data),
        int(n_rows), int(n_cols), mid_arr, int(threads),
    )


def matmul(a: SparseScores, b: SparseScores,
           mid=None, threads: int | None = None) -> SparseScores:
    """Square-matrix product of two SparseScores (same n)."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")
    indptr, indices, data = matmul_raw(
        a.indptr, a.indices, a.data, b.indptr, b.indices, b.data,
        a.n, b.n, mid=mid, threads=threads,
    )
    return SparseScores(n=a.n, indptr=indptr, indices=indices, data=data)


def pair_dots(mat: SparseScores, left, right,
              threads: int | None = None) -> np.ndarray:
    """Row dot products <row[left[t]], row[right[t]]>."""
    if threads is None:
        threads = default_threads()
    left = _as_i64(left)
    right = _as_i64(right)
    return _impl.pair_dots(
        _as_i64(mat.indptr), _as_i64(mat.indices), _as_f64(mat.data),
        left, right, mat.n, int(threads),
    )


def transpose_raw(indptr, indices, data, n_rows: int, n_cols: int):
    """CSR transpose via stable counting sort; pure index manipulation."""
    indptr = _as_i64(indptr)
    indices = _as_i64(indices)
    data = _as_f64(data)
    counts = np.bincount(indices, minlength=n_cols)
    t_indptr = np.zeros(n_cols + 1, dtype=np.int64)
    np.cumsum(counts, out=t_indptr[1:])
    rows = np.repeat(np.arange(n_rows, dtype=np.int64), np.diff(indptr))
    order = np.argsort(indices, kind="stable")
    return t_indptr, rows[order], data[order]


def transpose(mat: SparseScores) -> SparseScores:
    indptr, indices, data = transpose_raw(
        mat.indptr, mat.indices, mat.data, mat.n, mat.n
    )
    return SparseScores(n=mat.n, indptr=indptr, indices=indices, data=data)


def coalesce_coo(rows, cols, vals, n_rows: int):
    """COO triples -> CSR, summing duplicates.

    Duplicates are summed per (row, col) group in order of appearance
    (stable lexsort + reduceat), so the result is deterministic for a fixed
    triple sequence. Exact zeros are kept out of the result.
    """
    rows = _as_i64(rows)
    cols = _as_i64(cols)
    vals = _as_f64(vals)
    if rows.shape[0] == 0:
        return (np.zeros(n_rows + 1, np.int64), np.zeros(0, np.int64),
                np.zeros(0, np.float64))
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    boundary = np.empty(rows.shape[0], dtype=bool)
    boundary[0] = True
    boundary[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    starts = np.flatnonzero(boundary)
    summed = np.add.reduceat(vals, starts)
    u_rows, u_cols = rows[starts], cols[starts]
    keep = summed != 0.0
    u_rows, u_cols, summed = u_rows[keep], u_cols[keep], summed[keep]
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(u_rows, minlength=n_rows), out=indptr[1:])
    return indptr, u_cols, summed
