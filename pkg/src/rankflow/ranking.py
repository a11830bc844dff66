"""Ranked-list and sparse-score primitives shared by every pipeline stage.

Everything downstream operates on two currencies: per-object ranked lists
(truncated to the top-L most similar objects, positions 1-based with the
object itself first when it belongs to the collection) and row-sparse
nonnegative score matrices used to re-sort them. Both are immutable
snapshots after construction; all operations here are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputDataError

__all__ = [
    "SparseScores",
    "RankedList",
    "RankedLists",
    "NeighborhoodSet",
    "build_ranked_lists",
    "stable_resort",
    "neighborhood",
    "truncate",
    "default_depth",
]


@dataclass(frozen=True)
class SparseScores:
    """Row-sparse square matrix of nonnegative similarity scores (CSR).

    Column indices are strictly ascending within each row; absent entries
    mean score 0. `indptr` has length n+1, `indices`/`data` have length nnz.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        if self.indptr.shape != (self.n + 1,):
            raise ValueError("indptr must have length n+1")
        if self.indices.shape != self.data.shape:
            raise ValueError("indices and data must have equal length")

    @property
    def nnz(self) -> int:
        return int(self.indices.shape[0])

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(columns, values) of row i; columns ascending."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def get(self, i: int, j: int) -> float:
        cols, vals = self.row(i)
        t = np.searchsorted(cols, j)
        if t < cols.shape[0] and cols[t] == j:
            return float(vals[t])
        return 0.0

    def lookup(self, i: int, cols: np.ndarray, default: float = 0.0) -> np.ndarray:
        """Values of row i at `cols` (any order); missing entries -> default."""
        rcols, rvals = self.row(i)
        out = np.full(cols.shape[0], default, dtype=np.float64)
        if rcols.shape[0] == 0:
            return out
        t = np.searchsorted(rcols, cols)
        t_clip = np.minimum(t, rcols.shape[0] - 1)
        hit = rcols[t_clip] == cols
        out[hit] = rvals[t_clip[hit]]
        return out

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=np.float64)
        for i in range(self.n):
            cols, vals = self.row(i)
            out[i, cols] = vals
        return out

    @classmethod
    def from_rows(cls, n: int, rows) -> "SparseScores":
        """Build from an iterable of n (columns, values) pairs.

        Each row is sorted by column here; duplicate columns are rejected.
        Zero values are dropped so absence and zero stay synonymous.
        """
        indptr = np.zeros(n + 1, dtype=np.int64)
        col_parts, val_parts = [], []
        for i, (cols, vals) in enumerate(rows):
            cols = np.asarray(cols, dtype=np.int64)
            vals = np.asarray(vals, dtype=np.float64)
            keep = vals != 0.0
            cols, vals = cols[keep], vals[keep]
            order = np.argsort(cols, kind="stable")
            cols, vals = cols[order], vals[order]
            if cols.shape[0] > 1 and np.any(np.diff(cols) == 0):
                raise ValueError(f"duplicate column in row {i}")
            indptr[i + 1] = indptr[i] + cols.shape[0]
            col_parts.append(cols)
            val_parts.append(vals)
        indices = np.concatenate(col_parts) if col_parts else np.zeros(0, np.int64)
        data = np.concatenate(val_parts) if val_parts else np.zeros(0, np.float64)
        return cls(n=n, indptr=indptr, indices=indices, data=data)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseScores":
        dense = np.asarray(dense, dtype=np.float64)
        n = dense.shape[0]
        return cls.from_rows(
            n, ((np.flatnonzero(dense[i]), dense[i][dense[i] != 0]) for i in range(n))
        )

    @classmethod
    def empty(cls, n: int) -> "SparseScores":
        return cls(n=n, indptr=np.zeros(n + 1, np.int64),
                   indices=np.zeros(0, np.int64), data=np.zeros(0, np.float64))


@dataclass(frozen=True)
class RankedList:
    """One query's ranked list: object ids ordered by similarity descending."""

    owner: int
    ids: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    def position(self, obj: int) -> int:
        """1-based rank of `obj`, or 0 if absent."""
        hits = np.flatnonzero(self.ids == obj)
        return int(hits[0]) + 1 if hits.shape[0] else 0


@dataclass(frozen=True)
class RankedLists:
    """A set of ranked lists, one per collection object (owner = row index)."""

    n: int
    depth: int
    ids: list = field(repr=False)
    scores: list = field(repr=False)

    def __post_init__(self):
        if len(self.ids) != self.n or len(self.scores) != self.n:
            raise ValueError("need exactly one list per object")

    def list_for(self, q: int) -> RankedList:
        return RankedList(owner=q, ids=self.ids[q], scores=self.scores[q])

    def position_of(self, q: int, obj: int) -> int:
        hits = np.flatnonzero(self.ids[q] == obj)
        return int(hits[0]) + 1 if hits.shape[0] else 0

    def position_table(self) -> SparseScores:
        """Sparse matrix P with P[q, j] = 1-based rank of j in list q."""
        rows = (
            (self.ids[q], np.arange(1, self.ids[q].shape[0] + 1, dtype=np.float64))
            for q in range(self.n)
        )
        return SparseScores.from_rows(self.n, rows)

    def tobytes(self) -> bytes:
        """Canonical byte serialization (used by determinism checks)."""
        parts = []
        for q in range(self.n):
            parts.append(np.asarray(self.ids[q], np.int64).tobytes())
            parts.append(np.asarray(self.scores[q], np.float64).tobytes())
        return b"".join(parts)

    def same_membership(self, other: "RankedLists") -> bool:
        """True when every row holds the same member multiset."""
        if self.n != other.n:
            return False
        return all(
            np.array_equal(np.sort(self.ids[q]), np.sort(other.ids[q]))
            for q in range(self.n)
        )


@dataclass(frozen=True)
class NeighborhoodSet:
    """The first k entries of one object's ranked list."""

    owner: int
    members: np.ndarray

    def __len__(self) -> int:
        return int(self.members.shape[0])


def default_depth(n: int, k: int) -> int:
    """Default truncation depth: covers first- and second-order references."""
    return min(n, max(20 * k, 200))


def _validate_row(q, idx, dist):
    if np.any(np.isnan(dist)):
        raise InputDataError(f"NaN distance in row {q}")
    if np.any(np.isinf(dist)) or np.any(dist < 0):
        raise InputDataError(f"distances must be finite and nonnegative (row {q})")
    if np.any(idx < 0):
        raise InputDataError(f"negative object index in row {q}")


def build_ranked_lists(distances, depth: int, n: int | None = None) -> RankedLists:
    """Build ranked lists from per-query distances.

    `distances` is either an (n, n) array or a sequence of per-query rows,
    each row an (indices, dists) pair or a sequence of (index, dist) tuples.
    Rows are sorted by ascending distance with a stable tie-break on
    presentation order, except that the query itself wins any tie so it
    always occupies position 1 when present. Scores are negated distances
    (only the ordering matters downstream).
    """
    if depth < 1:
        raise ConfigurationError(f"depth must be >= 1, got {depth}")

    if isinstance(distances, np.ndarray) and distances.ndim == 2:
        mat = np.asarray(distances, dtype=np.float64)
        n = mat.shape[0]
        rows = ((np.arange(mat.shape[1], dtype=np.int64), mat[q]) for q in range(n))
    else:
        prepared = []
        for row in distances:
            if isinstance(row, tuple) and len(row) == 2 and np.ndim(row[0]) == 1:
                idx = np.asarray(row[0], dtype=np.int64)
                dist = np.asarray(row[1], dtype=np.float64)
            else:
                pairs = list(row)
                idx = np.asarray([p[0] for p in pairs], dtype=np.int64)
                dist = np.asarray([p[1] for p in pairs], dtype=np.float64)
            prepared.append((idx, dist))
        rows = prepared
        if n is None:
            n = len(prepared)

    ids_out, scores_out = [], []
    for q, (idx, dist) in enumerate(rows):
        _validate_row(q, idx, dist)
        self_tie = (idx != q).astype(np.int8)  # self wins distance ties
        presented = np.arange(idx.shape[0])
        order = np.lexsort((presented, self_tie, dist))[:depth]
        ids_out.append(idx[order].copy())
        scores_out.append(-dist[order])
    return RankedLists(n=n, depth=depth, ids=ids_out, scores=scores_out)


def stable_resort(lists: RankedLists, scores: SparseScores) -> RankedLists:
    """Re-sort every list by `scores` descending, stably.

    Each list is permuted as (id, score) pairs: membership and stored
    scores are unchanged, only the order moves. Objects with zero/absent
    score keep their prior relative order after all positively scored
    objects, so an empty score matrix is the identity.
    """
    if scores.n != lists.n:
        raise InputDataError(
            f"score matrix dimension {scores.n} != collection size {lists.n}"
        )
    ids_out, scores_out = [], []
    for q in range(lists.n):
        ids = lists.ids[q]
        vals = scores.lookup(q, ids)
        order = np.argsort(-vals, kind="stable")
        ids_out.append(ids[order])
        scores_out.append(lists.scores[q][order])
    return RankedLists(n=lists.n, depth=lists.depth, ids=ids_out, scores=scores_out)


def truncate(lists: RankedLists, depth: int) -> RankedLists:
    """Shrink every list to at most `depth` entries."""
    if depth < 1:
        raise ConfigurationError(f"depth must be >= 1, got {depth}")
    if depth >= lists.depth:
        return lists
    return RankedLists(
        n=lists.n, depth=depth,
        ids=[ids[:depth] for ids in lists.ids],
        scores=[sc[:depth] for sc in lists.scores],
    )


def neighborhood(lists: RankedLists, q: int, k: int) -> NeighborhoodSet:
    """First min(k, |list|) entries of list q."""
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    if k > lists.depth:
        raise ConfigurationError(
            f"neighborhood size k={k} cannot exceed truncation depth L={lists.depth}"
        )
    return NeighborhoodSet(owner=q, members=lists.ids[q][:k].copy())
