"""Similarity spreading inside hyperedges via Cartesian products.

Every pair of objects belonging to the same hyperedge accumulates an
association score weighted by that hyperedge's confidence:

    p(q, i, j)  = w(q) * h(q, i) * h(q, j)
    rho(i, j)   = sum of p(q, i, j) over hyperedges q containing both

Membership is decided by the incidence support, the scores come from the
filtered h-embeddings. The accumulation is exactly symmetric: the whole
score matrix equals M^T diag(w) M with M the h-embedding rows masked to
their hyperedge support, and the kernels group each term as w * (a * b).
"""

from __future__ import annotations

import numpy as np

from .errors import InputDataError
from .hypergraph import HypergraphState, build_hypergraph
from .ranking import RankedLists, SparseScores, stable_resort
from . import kernels

__all__ = ["pair_association", "cartesian_scores", "cartesian_rerank"]


def pair_association(state: HypergraphState, q: int, i: int, j: int) -> float:
    """Association of the pair (i, j) inside hyperedge q; 0 when not members."""
    members, _ = state.incidence.row(q)
    if not (np.isin(i, members) and np.isin(j, members)):
        return 0.0
    w = float(state.edge_weights[q])
    return w * (state.embeddings.get(q, i) * state.embeddings.get(q, j))


def _masked_embeddings(state: HypergraphState) -> SparseScores:
    """H rows restricted to each row's hyperedge (incidence) support."""
    rows = []
    for q in range(state.n):
        members, _ = state.incidence.row(q)
        cols, vals = state.embeddings.row(q)
        t = np.searchsorted(members, cols)
        t_clip = np.minimum(t, max(members.shape[0] - 1, 0))
        if members.shape[0]:
            keep = members[t_clip] == cols
        else:
            keep = np.zeros(cols.shape[0], dtype=bool)
        rows.append((cols[keep], vals[keep]))
    return SparseScores.from_rows(state.n, rows)


def cartesian_scores(state: HypergraphState,
                     threads: int | None = None) -> SparseScores:
    """Accumulate the pair associations of every hyperedge (full outer
    products over supports; no pruning)."""
    masked = _masked_embeddings(state)
    return kernels.matmul(kernels.transpose(masked), masked,
                          mid=state.edge_weights, threads=threads)


def cartesian_rerank(state: HypergraphState, lists: RankedLists,
                     threads: int | None = None
                     ) -> tuple[RankedLists, HypergraphState]:
    """Re-sort by accumulated pair associations; rebuild the hypergraph."""
    if state.n != lists.n:
        raise InputDataError(
            f"state dimension {state.n} != collection size {lists.n}"
        )
    scores = cartesian_scores(state, threads=threads)
    resorted = stable_resort(lists, scores)
    return resorted, build_hypergraph(resorted, state.k, threads=threads)
