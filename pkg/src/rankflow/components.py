"""Confident graph over the hypergraph, connected components and embeddings.

A plain graph is built on top of the hypergraph: candidate edges come from
the neighborhood sets, each candidate's confidence combines the h-embedding
dot product with both hyperedge weights, and only the strongest-ranked
candidates survive (the cutoff is a rank position derived from the mean
hyperedge weight). Connected components of that graph act as unsupervised
class estimates; summing the h-embeddings of a component gives its
cc-embedding, and projecting every object onto all cc-embeddings gives a
low-dimensional contextual vector suitable for downstream classifiers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputDataError
from .hypergraph import HypergraphState, build_hypergraph
from .ranking import RankedLists, SparseScores, stable_resort
from . import kernels

__all__ = [
    "Graph",
    "ComponentSet",
    "UnionFind",
    "candidate_edges",
    "edge_confidence",
    "edge_confidences",
    "edge_threshold",
    "build_graph",
    "connected_components",
    "cc_embeddings",
    "object_embeddings",
    "cc_scores",
    "cc_rerank",
    "classification_embeddings",
]


@dataclass(frozen=True)
class Graph:
    """Vertex count plus the selected edges, with selection diagnostics."""

    n: int
    edges: np.ndarray  # (m, 2) int64, lo < hi, confidence-ranked
    candidates: np.ndarray = field(default=None, repr=False)
    confidences: np.ndarray = field(default=None, repr=False)
    threshold: float = 0.0


@dataclass(frozen=True)
class ComponentSet:
    """Partition of the collection into connected components.

    `members[q]` is ascending; components are ordered by smallest member.
    The cc-embedding rows (one per component, summed h-embeddings of the
    members) are attached by `with_embeddings`.
    """

    assignment: np.ndarray
    members: list
    emb_indptr: np.ndarray = field(default=None, repr=False)
    emb_indices: np.ndarray = field(default=None, repr=False)
    emb_data: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return int(self.assignment.shape[0])

    @property
    def count(self) -> int:
        return len(self.members)

    def embedding_row(self, q: int) -> tuple[np.ndarray, np.ndarray]:
        if self.emb_indptr is None:
            raise ValueError("cc-embeddings not attached; call with_embeddings")
        lo, hi = self.emb_indptr[q], self.emb_indptr[q + 1]
        return self.emb_indices[lo:hi], self.emb_data[lo:hi]

    def with_embeddings(self, embeddings: SparseScores) -> "ComponentSet":
        indptr, indices, data = cc_embeddings(self, embeddings)
        return ComponentSet(
            assignment=self.assignment, members=self.members,
            emb_indptr=indptr, emb_indices=indices, emb_data=data,
        )


class UnionFind:
    """Array union-find with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return int(a)

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def candidate_edges(lists: RankedLists, k: int) -> np.ndarray:
    """Deduplicated unordered neighbor pairs, self-pairs excluded.

    Returned as an (m, 2) array with lo < hi, sorted lexicographically.
    """
    if k > lists.depth:
        raise ConfigurationError(f"k={k} exceeds list depth L={lists.depth}")
    n = lists.n
    codes = []
    for q in range(n):
        nbrs = lists.ids[q][:k]
        nbrs = nbrs[nbrs != q]
        if nbrs.shape[0] == 0:
            continue
        lo = np.minimum(q, nbrs)
        hi = np.maximum(q, nbrs)
        codes.append(lo * n + hi)
    if not codes:
        return np.zeros((0, 2), dtype=np.int64)
    uniq = np.unique(np.concatenate(codes))
    return np.stack([uniq // n, uniq % n], axis=1)


def edge_confidences(state: HypergraphState, pairs: np.ndarray,
                     threads: int | None = None) -> np.ndarray:
    """s(i, j) = <h_i, h_j> * w(i) * w(j) for each unordered pair."""
    if pairs.shape[0] == 0:
        return np.zeros(0, dtype=np.float64)
    dots = kernels.pair_dots(state.embeddings, pairs[:, 0], pairs[:, 1],
                             threads=threads)
    return dots * state.edge_weights[pairs[:, 0]] * state.edge_weights[pairs[:, 1]]


def edge_confidence(state: HypergraphState, pair) -> float:
    """Scalar confidence of one candidate pair."""
    arr = np.asarray([[pair[0], pair[1]]], dtype=np.int64)
    return float(edge_confidences(state, arr)[0])


def edge_threshold(state: HypergraphState) -> float:
    """Rank-position cutoff: mean hyperedge weight halved."""
    if state.n < 1:
        raise InputDataError("empty hypergraph")
    return float(np.add.reduce(state.edge_weights) / (2.0 * state.n))


def build_graph(state: HypergraphState, lists: RankedLists, k: int,
                threads: int | None = None) -> Graph:
    """Rank the candidate edges by confidence and keep positions below the
    threshold (so ceil(t)-1 edges; none when t <= 1)."""
    pairs = candidate_edges(lists, k)
    conf = edge_confidences(state, pairs, threads=threads)
    t_c = edge_threshold(state)
    if pairs.shape[0]:
        order = np.lexsort((pairs[:, 1], pairs[:, 0], -conf))
    else:
        order = np.zeros(0, dtype=np.int64)
    n_sel = min(pairs.shape[0], max(0, math.ceil(t_c) - 1))
    selected = pairs[order[:n_sel]]
    return Graph(n=state.n, edges=selected, candidates=pairs[order],
                 confidences=conf[order], threshold=t_c)


def connected_components(graph: Graph) -> ComponentSet:
    """Maximal connected components; singletons for untouched vertices."""
    uf = UnionFind(graph.n)
    for a, b in graph.edges:
        uf.union(int(a), int(b))
    roots = np.fromiter((uf.find(i) for i in range(graph.n)),
                        dtype=np.int64, count=graph.n)
    _, first_seen, assignment = np.unique(
        roots, return_index=True, return_inverse=True
    )
    # renumber so components are ordered by smallest member index
    order = np.argsort(np.argsort(first_seen, kind="stable"), kind="stable")
    assignment = order[assignment]
    members = [np.flatnonzero(assignment == q) for q in range(first_seen.shape[0])]
    return ComponentSet(assignment=assignment.astype(np.int64), members=members)


def cc_embeddings(components: ComponentSet, embeddings: SparseScores):
    """Per-component elementwise sums of member h-embeddings (raw CSR).

    Members contribute in ascending object order; a singleton component's
    embedding is exactly its member's h-row.
    """
    n = embeddings.n
    if components.n != n:
        raise InputDataError("component assignment does not cover the collection")
    per_row = np.diff(embeddings.indptr)
    owner = np.repeat(np.arange(n, dtype=np.int64), per_row)
    return kernels.coalesce_coo(
        components.assignment[owner], embeddings.indices, embeddings.data,
        components.count,
    )


def object_embeddings(embeddings: SparseScores,
                      components: ComponentSet,
                      threads: int | None = None) -> np.ndarray:
    """Dense (n, m) matrix of <h_q, c_i> projections onto cc-embeddings."""
    if components.emb_indptr is None:
        components = components.with_embeddings(embeddings)
    m = components.count
    ct_indptr, ct_indices, ct_data = kernels.transpose_raw(
        components.emb_indptr, components.emb_indices, components.emb_data,
        m, embeddings.n,
    )
    indptr, indices, data = kernels.matmul_raw(
        embeddings.indptr, embeddings.indices, embeddings.data,
        ct_indptr, ct_indices, ct_data,
        embeddings.n, m, threads=threads,
    )
    out = np.zeros((embeddings.n, m), dtype=np.float64)
    for i in range(embeddings.n):
        lo, hi = indptr[i], indptr[i + 1]
        out[i, indices[lo:hi]] = data[lo:hi]
    return out


def _component_neighborhood(components: ComponentSet, q: int,
                            k: int) -> np.ndarray:
    """Top-k objects by cc-embedding value (value desc, index asc on ties)."""
    cols, vals = components.embedding_row(q)
    order = np.lexsort((cols, -vals))[:k]
    return cols[order]


def cc_scores(lists: RankedLists, components: ComponentSet,
              obj_emb: np.ndarray, k: int,
              rank_factor: str = "literal") -> SparseScores:
    """Pair scores combining co-membership, embedding similarity and rank.

    For every component, the k objects with the highest cc-embedding values
    form its neighborhood; every ordered pair drawn from it accumulates
    1 + sqrt(r_i^2 + r_j^2) * <e_i, e_j> with r the 1-based ranks inside
    that neighborhood. The score of a stored pair is its accumulated
    numerator divided by the current rank position.

    `rank_factor="inverted"` replaces ranks r by (s + 1 - r) inside the
    square root (sensitivity experiments only).
    """
    if rank_factor not in ("literal", "inverted"):
        raise ConfigurationError(f"unknown rank_factor: {rank_factor!r}")
    if components.emb_indptr is None:
        raise InputDataError("components must carry cc-embeddings")
    n = lists.n
    coo_rows, coo_cols, coo_vals = [], [], []
    for q in range(components.count):
        sel = _component_neighborhood(components, q, k)
        s = sel.shape[0]
        if s == 0:
            continue
        ranks = np.arange(1, s + 1, dtype=np.float64)
        if rank_factor == "inverted":
            ranks = s + 1.0 - ranks
        sub = obj_emb[sel]
        dots = np.einsum("ic,jc->ij", sub, sub)
        factor = np.sqrt(ranks[:, None] ** 2 + ranks[None, :] ** 2)
        numer = 1.0 + factor * dots
        coo_rows.append(np.repeat(sel, s))
        coo_cols.append(np.tile(sel, s))
        coo_vals.append(numer.ravel())
    if coo_rows:
        indptr, indices, data = kernels.coalesce_coo(
            np.concatenate(coo_rows), np.concatenate(coo_cols),
            np.concatenate(coo_vals), n,
        )
        numerators = SparseScores(n=n, indptr=indptr, indices=indices, data=data)
    else:
        numerators = SparseScores.empty(n)

    rows = []
    for i in range(n):
        js = lists.ids[i]
        positions = np.arange(1, js.shape[0] + 1, dtype=np.float64)
        rows.append((js, numerators.lookup(i, js) / positions))
    return SparseScores.from_rows(n, rows)


def cc_rerank(lists: RankedLists, components: ComponentSet,
              obj_emb: np.ndarray, k: int,
              rank_factor: str = "literal",
              threads: int | None = None
              ) -> tuple[RankedLists, HypergraphState]:
    """Stably re-sort by the component pair scores; rebuild the hypergraph."""
    scores = cc_scores(lists, components, obj_emb, k, rank_factor=rank_factor)
    resorted = stable_resort(lists, scores)
    return resorted, build_hypergraph(resorted, k, threads=threads)


def classification_embeddings(lists: RankedLists, state: HypergraphState,
                              k: int, l2_normalize: bool = False,
                              threads: int | None = None) -> np.ndarray:
    """Embeddings for downstream classifiers: rebuild the confident graph
    from the final state and project onto the fresh cc-embeddings."""
    graph = build_graph(state, lists, k, threads=threads)
    comps = connected_components(graph).with_embeddings(state.embeddings)
    emb = object_embeddings(state.embeddings, comps, threads=threads)
    if l2_normalize:
        norms = np.linalg.norm(emb, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        emb = emb / norms
    return emb
