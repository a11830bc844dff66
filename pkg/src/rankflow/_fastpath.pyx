# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the sparse hot loops.

Must stay semantically aligned with `_purepath.py`: CSR products accumulate
row-by-row in ascending column order into a dense scratch, producing
byte-identical results to the fallback. Rows are independent, so the prange
parallelism below is deterministic for any thread count (disjoint writes,
fixed per-row accumulation order).
"""

from cython.parallel import prange, threadid
from libc.stdlib cimport qsort

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"

ctypedef cnp.int64_t i64
ctypedef cnp.float64_t f64


cdef int _cmp_i64(const void* a, const void* b) noexcept nogil:
    cdef i64 x = (<const i64*> a)[0]
    cdef i64 y = (<const i64*> b)[0]
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


def csr_matmul(i64[::1] a_indptr, i64[::1] a_indices, f64[::1] a_data,
               i64[::1] b_indptr, i64[::1] b_indices, f64[::1] b_data,
               long n_rows, long n_cols, mid=None, long threads=1):
    """C = A @ diag(mid) @ B with deterministic accumulation order.

    Terms are grouped mid[x] * (A[i,x] * B[x,j]) when `mid` is present so
    symmetric inputs yield exactly symmetric products. Exact zeros dropped.
    """
    cdef bint has_mid = mid is not None
    cdef f64[::1] mid_v
    if has_mid:
        mid_v = np.ascontiguousarray(mid, dtype=np.float64)
    else:
        mid_v = np.zeros(1, dtype=np.float64)

    if threads < 1:
        threads = 1

    cdef f64[:, ::1] scratch = np.zeros((threads, n_cols), dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] mask = np.zeros((threads, n_cols), dtype=np.uint8)
    cdef i64[:, ::1] touched = np.empty((threads, n_cols), dtype=np.int64)

    cdef i64[::1] row_touch = np.zeros(n_rows, dtype=np.int64)
    cdef long i, tid
    cdef i64 t, x, u, j, cnt

    # pass 1: per-row count of touched columns (upper bound on nnz)
    for i in prange(n_rows, nogil=True, num_threads=threads, schedule="static"):
        tid = threadid()
        cnt = 0
        for t in range(a_indptr[i], a_indptr[i + 1]):
            x = a_indices[t]
            for u in range(b_indptr[x], b_indptr[x + 1]):
                j = b_indices[u]
                if not mask[tid, j]:
                    mask[tid, j] = 1
                    touched[tid, cnt] = j
                    cnt = cnt + 1
        row_touch[i] = cnt
        for t in range(cnt):
            mask[tid, touched[tid, t]] = 0

    offsets_np = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.asarray(row_touch), out=offsets_np[1:])
    cdef i64[::1] offsets = offsets_np
    cdef i64 cap = offsets_np[n_rows]

    out_indices_np = np.empty(cap, dtype=np.int64)
    out_data_np = np.empty(cap, dtype=np.float64)
    cdef i64[::1] out_indices = out_indices_np
    cdef f64[::1] out_data = out_data_np
    cdef i64[::1] row_nnz = np.zeros(n_rows, dtype=np.int64)
    cdef f64 av, val
    cdef i64 base, w

    # pass 2: accumulate values, sort touched columns, write nonzeros
    for i in prange(n_rows, nogil=True, num_threads=threads, schedule="static"):
        tid = threadid()
        cnt = 0
        for t in range(a_indptr[i], a_indptr[i + 1]):
            x = a_indices[t]
            av = a_data[t]
            if has_mid:
                for u in range(b_indptr[x], b_indptr[x + 1]):
                    j = b_indices[u]
                    if not mask[tid, j]:
                        mask[tid, j] = 1
                        touched[tid, cnt] = j
                        cnt = cnt + 1
                    scratch[tid, j] += mid_v[x] * (av * b_data[u])
            else:
                for u in range(b_indptr[x], b_indptr[x + 1]):
                    j = b_indices[u]
                    if not mask[tid, j]:
                        mask[tid, j] = 1
                        touched[tid, cnt] = j
                        cnt = cnt + 1
                    scratch[tid, j] += av * b_data[u]
        qsort(&touched[tid, 0], cnt, sizeof(i64), _cmp_i64)
        base = offsets[i]
        w = 0
        for t in range(cnt):
            j = touched[tid, t]
            val = scratch[tid, j]
            if val != 0.0:
                out_indices[base + w] = j
                out_data[base + w] = val
                w = w + 1
            scratch[tid, j] = 0.0
            mask[tid, j] = 0
        row_nnz[i] = w

    # serial compaction: squeeze out the slack left by dropped zeros
    indptr_np = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.asarray(row_nnz), out=indptr_np[1:])
    cdef i64[::1] indptr = indptr_np
    cdef i64 nnz = indptr_np[n_rows]
    final_indices_np = np.empty(nnz, dtype=np.int64)
    final_data_np = np.empty(nnz, dtype=np.float64)
    cdef i64[::1] f_indices = final_indices_np
    cdef f64[::1] f_data = final_data_np
    cdef i64 src, dst
    with nogil:
        for i in range(n_rows):
            src = offsets[i]
            dst = indptr[i]
            for t in range(row_nnz[i]):
                f_indices[dst + t] = out_indices[src + t]
                f_data[dst + t] = out_data[src + t]
    return indptr_np, final_indices_np, final_data_np


def pair_dots(i64[::1] indptr, i64[::1] indices, f64[::1] data,
              i64[::1] left, i64[::1] right, long n_cols, long threads=1):
    """<row[left[t]], row[right[t]]> via two-pointer merge over sorted columns."""
    cdef long m = left.shape[0]
    out_np = np.zeros(m, dtype=np.float64)
    cdef f64[::1] out = out_np
    if threads < 1:
        threads = 1
    cdef long t
    cdef i64 i, j, p, q, pe, qe
    cdef f64 s
    for t in prange(m, nogil=True, num_threads=threads, schedule="static"):
        i = left[t]
        j = right[t]
        p = indptr[i]
        pe = indptr[i + 1]
        q = indptr[j]
        qe = indptr[j + 1]
        s = 0.0
        while p < pe and q < qe:
            if indices[p] == indices[q]:
                s = s + data[p] * data[q]
                p = p + 1
                q = q + 1
            elif indices[p] < indices[q]:
                p = p + 1
            else:
                q = q + 1
        out[t] = s
    return out_np
