"""Numpy fallback for the compiled kernels.

Semantics mirror `_fastpath.pyx` exactly: row-by-row accumulation in
ascending column order, so CSR products are byte-identical across the two
backends. Row dot products use numpy's pairwise summation and therefore
agree with the compiled two-pointer merge only to ~1e-12 relative.

The `threads` arguments are accepted for interface parity and ignored;
this path is serial.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def csr_matmul(a_indptr, a_indices, a_data,
               b_indptr, b_indices, b_data,
               n_rows, n_cols, mid=None, threads=1):
    """CSR product C = A @ diag(mid) @ B, rows accumulated left-to-right.

    When `mid` is given, each term is grouped as mid[x] * (A[i,x] * B[x,j])
    so products built from symmetric inputs come out exactly symmetric.
    Returns (indptr, indices, data) with ascending columns per row and
    exact zeros dropped.
    """
    scratch = np.zeros(n_cols, dtype=np.float64)
    mask = np.zeros(n_cols, dtype=bool)
    out_indptr = np.zeros(n_rows + 1, dtype=np.int64)
    col_parts, val_parts = [], []
    for i in range(n_rows):
        lo, hi = a_indptr[i], a_indptr[i + 1]
        for t in range(lo, hi):
            x = a_indices[t]
            av = a_data[t]
            bcols = b_indices[b_indptr[x]:b_indptr[x + 1]]
            bvals = b_data[b_indptr[x]:b_indptr[x + 1]]
            if mid is None:
                scratch[bcols] += av * bvals
            else:
                scratch[bcols] += mid[x] * (av * bvals)
            mask[bcols] = True
        cols = np.flatnonzero(mask)
        vals = scratch[cols]
        keep = vals != 0.0
        cols, vals = cols[keep], vals[keep]
        col_parts.append(cols.astype(np.int64))
        val_parts.append(vals.copy())
        out_indptr[i + 1] = out_indptr[i] + cols.shape[0]
        scratch[mask] = 0.0
        mask[:] = False
    indices = np.concatenate(col_parts) if col_parts else np.zeros(0, np.int64)
    data = np.concatenate(val_parts) if val_parts else np.zeros(0, np.float64)
    return out_indptr, indices, data


def pair_dots(indptr, indices, data, left, right, n_cols, threads=1):
    """Dot products <row[left[t]], row[right[t]]> for each pair t.

    Pairs are processed grouped by consecutive equal `left` values: the left
    row is scattered into a dense scratch once per run, then each right row
    is gathered against it.
    """
    m = left.shape[0]
    out = np.zeros(m, dtype=np.float64)
    scratch = np.zeros(n_cols, dtype=np.float64)
    t = 0
    while t < m:
        i = left[t]
        lo, hi = indptr[i], indptr[i + 1]
        icols = indices[lo:hi]
        scratch[icols] = data[lo:hi]
        u = t
        while u < m and left[u] == i:
            j = right[u]
            jlo, jhi = indptr[j], indptr[j + 1]
            out[u] = np.dot(scratch[indices[jlo:jhi]], data[jlo:jhi])
            u += 1
        scratch[icols] = 0.0
        t = u
    return out
