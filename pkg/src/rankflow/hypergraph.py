"""Rank-based hypergraph construction and the iterative affinity re-ranking.

Every object i owns one hyperedge built from its first- and second-order
neighborhoods. Membership scores accumulate log-decayed rank weights over
the reference paths i -> x -> j:

    r(i, j) = sum over x in N(i,k) with j in N(x,k) of w(i,x) * w(x,j)
    w(i, x) = 1 - log_k(rank of x in i's list)

The square incidence matrix is then self-multiplied: the product row i
cross-checks how i's members are scored by the hyperedges of other members,
filtering out second-order noise. Rows of the product are the contextual
h-embeddings; a hyperedge's weight is the mass of its k strongest entries.

Re-ranking scores pairs by the dot product of their h-embeddings (the
affinity matrix) divided by the current rank position, and repeats for a
configurable number of rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .ranking import RankedLists, SparseScores, stable_resort
from . import kernels

__all__ = [
    "Hyperedge",
    "HypergraphState",
    "position_weight",
    "build_incidence",
    "filter_incidence",
    "hyperedge_weights",
    "build_hypergraph",
    "affinity",
    "affinity_scores",
    "hypergraph_rerank",
]


@dataclass(frozen=True)
class Hyperedge:
    """Support and membership scores of one object's hyperedge."""

    owner: int
    members: np.ndarray
    scores: np.ndarray


@dataclass(frozen=True)
class HypergraphState:
    """Incidence matrix, filtered h-embeddings and per-hyperedge weights."""

    incidence: SparseScores
    embeddings: SparseScores
    edge_weights: np.ndarray
    k: int

    @property
    def n(self) -> int:
        return self.incidence.n

    def hyperedge(self, i: int) -> Hyperedge:
        members, scores = self.incidence.row(i)
        return Hyperedge(owner=i, members=members, scores=scores)


def position_weight(rank, k: int):
    """Log-decayed weight 1 - log_k(rank) for 1-based ranks in [1, k]."""
    if k < 2:
        raise ConfigurationError(f"log base k must be >= 2, got {k}")
    rank = np.asarray(rank, dtype=np.float64)
    return 1.0 - np.log(rank) / math.log(k)


def build_incidence(lists: RankedLists, k: int) -> SparseScores:
    """Accumulate membership scores over first- and second-order references.

    Neighborhoods are the first min(k, list length) entries, so degenerate
    collections shorter than k still build (the rank-1 weight is 1 for any
    log base).
    """
    if k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    n = lists.n
    tops = [lists.ids[i][:k] for i in range(n)]
    weights = [
        position_weight(np.arange(1, t.shape[0] + 1), k) for t in tops
    ]
    scratch = np.zeros(n, dtype=np.float64)
    mask = np.zeros(n, dtype=bool)
    rows = []
    for i in range(n):
        for x, wx in zip(tops[i], weights[i]):
            scratch[tops[x]] += wx * weights[x]
            mask[tops[x]] = True
        cols = np.flatnonzero(mask)
        vals = scratch[cols]
        keep = vals > 0.0
        rows.append((cols[keep].copy(), vals[keep].copy()))
        scratch[mask] = 0.0
        mask[:] = False
    return SparseScores.from_rows(n, rows)


def filter_incidence(incidence: SparseScores,
                     threads: int | None = None) -> SparseScores:
    """Square the incidence matrix to cross-check member references."""
    return kernels.matmul(incidence, incidence, threads=threads)


def hyperedge_weights(embeddings: SparseScores, k: int) -> np.ndarray:
    """w[i] = sum of the k largest h(i, .) values (all of them if fewer).

    Candidates are ordered value-descending with ascending column as the
    tie-break, and summed in that order, so the result is canonical.
    """
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    out = np.zeros(embeddings.n, dtype=np.float64)
    for i in range(embeddings.n):
        cols, vals = embeddings.row(i)
        if vals.shape[0] > k:
            order = np.lexsort((cols, -vals))[:k]
            out[i] = np.add.reduce(vals[order])
        else:
            out[i] = np.add.reduce(vals)
    return out


def build_hypergraph(lists: RankedLists, k: int,
                     threads: int | None = None) -> HypergraphState:
    """Incidence, filtered embeddings and hyperedge weights in one pass."""
    incidence = build_incidence(lists, k)
    embeddings = filter_incidence(incidence, threads=threads)
    weights = hyperedge_weights(embeddings, k)
    return HypergraphState(
        incidence=incidence, embeddings=embeddings, edge_weights=weights, k=k
    )


def affinity(embeddings: SparseScores,
             threads: int | None = None) -> SparseScores:
    """Full pairwise h-embedding dot products (H @ H^T).

    Only pairs sharing at least one support column are materialized; all
    other entries are exactly zero.
    """
    return kernels.matmul(embeddings, kernels.transpose(embeddings),
                          threads=threads)


def affinity_scores(lists: RankedLists, embeddings: SparseScores,
                    threads: int | None = None) -> SparseScores:
    """rho(i, j) = <h_i, h_j> / tau_i(j) for each stored pair of `lists`."""
    n = lists.n
    lengths = np.array([ids.shape[0] for ids in lists.ids], dtype=np.int64)
    left = np.repeat(np.arange(n, dtype=np.int64), lengths)
    right = np.concatenate(lists.ids) if n else np.zeros(0, np.int64)
    dots = kernels.pair_dots(embeddings, left, right, threads=threads)
    positions = np.concatenate(
        [np.arange(1, m + 1, dtype=np.float64) for m in lengths]
    ) if n else np.zeros(0)
    vals = dots / positions
    rows = []
    start = 0
    for m in lengths:
        rows.append((right[start:start + m], vals[start:start + m]))
        start += m
    return SparseScores.from_rows(n, rows)


def hypergraph_rerank(lists: RankedLists, k: int, iterations: int = 2,
                      threads: int | None = None
                      ) -> tuple[RankedLists, HypergraphState]:
    """Run the hypergraph re-ranking loop and return the final state.

    Each round rebuilds the hypergraph from the current lists, scores every
    stored pair by affinity over current rank, and stably re-sorts. The
    returned state is rebuilt from the final lists.
    """
    if iterations < 1:
        raise ConfigurationError(f"iterations must be >= 1, got {iterations}")
    current = lists
    for _ in range(iterations):
        state = build_hypergraph(current, k, threads=threads)
        scores = affinity_scores(current, state.embeddings, threads)
        current = stable_resort(current, scores)
    return current, build_hypergraph(current, k, threads=threads)
