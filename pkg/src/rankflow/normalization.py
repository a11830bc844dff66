"""Reciprocal sigmoid rank normalization and multi-ranker fusion.

The normalized similarity between objects i and j combines the forward rank
of j in i's list (squared weight) with the reciprocal rank of i in j's list
(linear weight), each mapped through a sigmoid that decays fast around the
neighborhood size k:

    rho(i, j) = sigma(tau_i(j))^2 * sigma(tau_j(i))
    sigma(p)  = 1 - 1 / (1 + exp(-alpha * (p - k/2)))

Mutual top-ranked pairs keep scores near sigma(1)^3 while one-sided
references decay; the asymmetry (squared vs linear) is deliberate and
carries confidence information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputDataError
from .ranking import RankedLists, SparseScores, stable_resort
from . import kernels

__all__ = ["SigmoidParams", "sigmoid_weight", "normalize", "fuse_rankers"]


@dataclass(frozen=True)
class SigmoidParams:
    """Steepness and neighborhood size of the reciprocal sigmoid."""

    alpha: float = 0.1
    k: int = 20

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if self.k < 2:
            raise ConfigurationError(f"k must be >= 2, got {self.k}")


def sigmoid_weight(position, params: SigmoidParams):
    """Weight in (0, 1) for a 1-based rank position; strictly decreasing."""
    position = np.asarray(position, dtype=np.float64)
    return 1.0 - 1.0 / (1.0 + np.exp(-params.alpha * (position - params.k / 2.0)))


def _reciprocal_positions(lists: RankedLists) -> SparseScores:
    """R with R[i, j] = 1-based rank of i in list j, over stored pairs.

    This is the transpose of the position table: row i gives, for every
    list j that contains i, the position of i there.
    """
    pos = lists.position_table()
    return kernels.transpose(pos)


def normalize(lists: RankedLists,
              params: SigmoidParams) -> tuple[RankedLists, SparseScores]:
    """Score every stored (i, j) pair and stably re-sort the lists.

    Returns the updated lists and the score matrix backing the sort.
    Reciprocal ranks outside the stored top-L default to L+1, where sigma
    has already decayed to near zero.
    """
    if params.k > lists.depth:
        raise ConfigurationError(
            f"k={params.k} exceeds list depth L={lists.depth}"
        )
    reciprocal = _reciprocal_positions(lists)
    absent = float(lists.depth + 1)
    rows = []
    for i in range(lists.n):
        js = lists.ids[i]
        fwd = np.arange(1, js.shape[0] + 1, dtype=np.float64)
        rec = reciprocal.lookup(i, js, default=absent)
        s_fwd = sigmoid_weight(fwd, params)
        s_rec = sigmoid_weight(rec, params)
        rows.append((js, s_fwd * s_fwd * s_rec))
    scores = SparseScores.from_rows(lists.n, rows)
    return stable_resort(lists, scores), scores


def fuse_rankers(list_sets, params: SigmoidParams) -> RankedLists:
    """Fuse several rankers over the same collection into one ranked-list set.

    Each input is normalized independently; the normalized scores are summed
    into a single sparse matrix and each fused list is the per-row sort of
    that matrix (score descending, ties stable on the first input's
    ordering, then object index), truncated to the deepest input depth.
    """
    list_sets = list(list_sets)
    if not list_sets:
        raise InputDataError("fuse_rankers needs at least one ranker")
    n = list_sets[0].n
    for s in list_sets[1:]:
        if s.n != n:
            raise InputDataError(
                f"all rankers must cover the same collection ({s.n} != {n})"
            )
    depth = max(s.depth for s in list_sets)

    fused_rows, fused_cols, fused_vals = [], [], []
    for s in list_sets:
        _, scores = normalize(s, params)
        per_row = np.diff(scores.indptr)
        fused_rows.append(np.repeat(np.arange(n, dtype=np.int64), per_row))
        fused_cols.append(scores.indices)
        fused_vals.append(scores.data)
    indptr, indices, data = kernels.coalesce_coo(
        np.concatenate(fused_rows), np.concatenate(fused_cols),
        np.concatenate(fused_vals), n,
    )
    fused = SparseScores(n=n, indptr=indptr, indices=indices, data=data)

    first = list_sets[0].position_table()
    tie_break = float(depth + 1)
    ids_out, scores_out = [], []
    for i in range(n):
        cols, vals = fused.row(i)
        first_pos = first.lookup(i, cols, default=tie_break)
        order = np.lexsort((cols, first_pos, -vals))[:depth]
        ids_out.append(cols[order])
        scores_out.append(vals[order])
    return RankedLists(n=n, depth=depth, ids=ids_out, scores=scores_out)
