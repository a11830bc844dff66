"""Five-stage rank flow orchestration, rank aggregation and unseen queries.

Stage order: rank normalization, iterated hypergraph re-ranking, Cartesian
product re-ranking, then optionally connected-component re-ranking and the
classification embeddings. Each stage consumes the previous stage's ranked
lists; positions beyond the truncation depth are never re-ranked (callers
evaluating full-length metrics append the original tail, see
`extend_with_tail`). The offline result is an immutable index that answers
queries for objects outside the collection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputDataError, StageError
from .ranking import RankedLists, RankedList, default_depth, truncate
from .normalization import SigmoidParams, normalize, fuse_rankers
from .hypergraph import HypergraphState, hypergraph_rerank, position_weight
from .cartesian import cartesian_rerank
from .components import (
    build_graph, connected_components, object_embeddings, cc_rerank,
    classification_embeddings,
)
from . import kernels

__all__ = [
    "RfeConfig",
    "RfeIndex",
    "run_rfe",
    "run_aggregation",
    "query_unseen",
    "extend_with_tail",
]

STAGE_NAMES = ("input", "normalize", "hypergraph", "cartesian", "components")


@dataclass(frozen=True)
class RfeConfig:
    """All pipeline hyperparameters.

    `depth` (the truncation L) may be left None to use
    min(n, max(20k, 200)) at run time.
    """

    k: int = 20
    depth: int | None = None
    alpha: float = 0.1
    iterations: int = 2
    run_cc_stage: bool = True
    emit_embeddings: bool = False

    def __post_init__(self):
        if self.k < 2:
            raise ConfigurationError(f"k must be >= 2, got {self.k}")
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if self.iterations < 1:
            raise ConfigurationError(
                f"iterations must be >= 1, got {self.iterations}"
            )
        if self.depth is not None and self.depth < self.k:
            raise ConfigurationError(
                f"depth L={self.depth} must be >= k={self.k}"
            )

    def resolve_depth(self, n: int) -> int:
        return self.depth if self.depth is not None else default_depth(n, self.k)

    def validate_for(self, n: int):
        if self.k > n:
            raise ConfigurationError(f"k={self.k} exceeds collection size {n}")
        if self.depth is not None and self.depth > n:
            raise ConfigurationError(
                f"depth L={self.depth} exceeds collection size {n}"
            )

    def sigmoid_params(self) -> SigmoidParams:
        return SigmoidParams(alpha=self.alpha, k=self.k)


@dataclass(frozen=True)
class RfeIndex:
    """Offline half of the method: everything needed to answer queries.

    Holds the final ranked lists, the final hypergraph state (whichever
    stage ran last), optional classification embeddings and per-stage
    ranked-list snapshots for ablation.
    """

    config: RfeConfig
    lists: RankedLists
    state: HypergraphState
    embeddings: np.ndarray | None = None
    stages: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.lists.n

    def save(self, path):
        from .serialization import save_index
        save_index(self, path)

    @classmethod
    def load(cls, path) -> "RfeIndex":
        from .serialization import load_index
        return load_index(path)


def run_rfe(lists: RankedLists, config: RfeConfig,
            threads: int | None = None) -> tuple[RankedLists, RfeIndex]:
    """Run the full rank flow over one ranked-list set."""
    if lists.n == 1:
        # degenerate collection: nothing to re-rank, emit the trivial state
        from .hypergraph import build_hypergraph
        state = build_hypergraph(lists, k=max(2, config.k), threads=threads)
        index = RfeIndex(config=config, lists=lists, state=state,
                         embeddings=None, stages={"input": lists})
        return lists, index
    config.validate_for(lists.n)
    if config.k > lists.depth:
        raise ConfigurationError(
            f"k={config.k} exceeds the lists' depth L={lists.depth}"
        )
    normalized, _ = _run_stage(
        "normalize", lambda: normalize(lists, config.sigmoid_params())
    )
    return _run_from_normalized(lists, normalized, config, threads)


def _run_stage(name, fn):
    try:
        return fn()
    except (ConfigurationError, InputDataError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _run_from_normalized(original: RankedLists, normalized: RankedLists,
                         config: RfeConfig, threads: int | None
                         ) -> tuple[RankedLists, RfeIndex]:
    """Steps 2 onward, shared by the plain and aggregation entry points."""
    stages = {"input": original, "normalize": normalized}

    current, state = _run_stage(
        "hypergraph",
        lambda: hypergraph_rerank(normalized, config.k, config.iterations,
                                  threads=threads),
    )
    stages["hypergraph"] = current

    current, state = _run_stage(
        "cartesian", lambda: cartesian_rerank(state, current, threads=threads)
    )
    stages["cartesian"] = current

    if config.run_cc_stage:
        def cc_stage():
            graph = build_graph(state, current, config.k, threads=threads)
            comps = connected_components(graph).with_embeddings(
                state.embeddings
            )
            emb = object_embeddings(state.embeddings, comps, threads=threads)
            return cc_rerank(current, comps, emb, config.k, threads=threads)

        current, state = _run_stage("components", cc_stage)
        stages["components"] = current

    embeddings = None
    if config.emit_embeddings:
        embeddings = _run_stage(
            "embed",
            lambda: classification_embeddings(current, state, config.k,
                                              threads=threads),
        )

    index = RfeIndex(config=config, lists=current, state=state,
                     embeddings=embeddings, stages=stages)
    return current, index


def run_aggregation(list_sets, config: RfeConfig,
                    threads: int | None = None
                    ) -> tuple[RankedLists, RfeIndex]:
    """Fuse several rankers, then resume the rank flow from the fused lists.

    The fusion already normalizes every ranker (the accumulated scores ARE
    the normalized scores), so the pipeline continues at the hypergraph
    stage; fusing a single ranker is exactly equivalent to run_rfe on it.
    """
    list_sets = list(list_sets)
    fused = _run_stage(
        "fuse", lambda: fuse_rankers(list_sets, config.sigmoid_params())
    )
    if config.depth is not None and config.depth < fused.depth:
        fused = truncate(fused, config.depth)
    if fused.n == 1:
        return run_rfe(fused, config, threads=threads)
    config.validate_for(fused.n)
    if config.k > fused.depth:
        raise ConfigurationError(
            f"k={config.k} exceeds the fused lists' depth L={fused.depth}"
        )
    return _run_from_normalized(fused, fused, config, threads)


def extend_with_tail(refined: RankedLists, original: RankedLists) -> RankedLists:
    """Full-length orderings: re-ranked head, then the original tail order."""
    if refined.n != original.n:
        raise InputDataError("collections differ in size")
    ids_out, scores_out = [], []
    for q in range(refined.n):
        head = refined.ids[q]
        in_head = np.isin(original.ids[q], head)
        tail = original.ids[q][~in_head]
        ids_out.append(np.concatenate([head, tail]))
        scores_out.append(np.concatenate([
            refined.scores[q],
            np.full(tail.shape[0], -np.inf, dtype=np.float64),
        ]))
    return RankedLists(n=refined.n, depth=max(refined.depth, original.depth),
                       ids=ids_out, scores=scores_out)


def _query_incidence_row(index: RfeIndex, top: np.ndarray, k: int):
    """Incidence scores of the query's hyperedge against the collection."""
    lists = index.lists
    n = lists.n
    scratch = np.zeros(n, dtype=np.float64)
    w_query = position_weight(np.arange(1, top.shape[0] + 1), k)
    for x, wx in zip(top, w_query):
        nbrs = lists.ids[x][:k]
        scratch[nbrs] += wx * position_weight(
            np.arange(1, nbrs.shape[0] + 1), k
        )
    cols = np.flatnonzero(scratch)
    return cols.astype(np.int64), scratch[cols]


def query_unseen(index: RfeIndex, neighbors, k: int | None = None) -> RankedList:
    """Rank the whole indexed collection for an external query.

    `neighbors` holds (object index, distance) entries for the query
    against the indexed collection (any order, at least one). The query's
    hyperedge is built from its top-k and their indexed neighborhoods, its
    incidence row is filtered through the indexed incidence matrix, and the
    collection is ranked by cosine similarity between the resulting
    h-embedding and the indexed h-embedding rows (ties stable on index).
    """
    if k is None:
        k = index.config.k
    if k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    if k > index.lists.depth:
        raise ConfigurationError(
            f"k={k} exceeds the index depth L={index.lists.depth}"
        )

    pairs = list(neighbors)
    if not pairs:
        raise InputDataError("empty neighbor list")
    ids = np.asarray([p[0] for p in pairs], dtype=np.int64)
    dist = np.asarray([p[1] for p in pairs], dtype=np.float64)
    if np.any(np.isnan(dist)):
        raise InputDataError("NaN distance in query neighbors")
    if np.any((ids < 0) | (ids >= index.n)):
        raise InputDataError("query neighbor references an unknown object")
    if np.unique(ids).shape[0] != ids.shape[0]:
        raise InputDataError("duplicate object in query neighbors")

    order = np.lexsort((np.arange(ids.shape[0]), dist))
    top = ids[order[:k]]

    q_cols, q_vals = _query_incidence_row(index, top, k)
    inc = index.state.incidence
    h_indptr, h_indices, h_data = kernels.matmul_raw(
        np.array([0, q_cols.shape[0]], dtype=np.int64), q_cols, q_vals,
        inc.indptr, inc.indices, inc.data, 1, inc.n,
    )
    q_dense = np.zeros(index.n, dtype=np.float64)
    q_dense[h_indices] = h_data
    q_norm = math.sqrt(float(np.dot(h_data, h_data)))

    emb = index.state.embeddings
    per_row = np.repeat(np.arange(index.n, dtype=np.int64),
                        np.diff(emb.indptr))
    dots = np.bincount(per_row, weights=emb.data * q_dense[emb.indices],
                       minlength=index.n)
    norms = np.sqrt(np.bincount(per_row, weights=emb.data * emb.data,
                                minlength=index.n))
    denom = q_norm * norms
    cosine = np.divide(dots, denom, out=np.zeros(index.n), where=denom > 0)

    rank_order = np.lexsort((np.arange(index.n), -cosine))
    return RankedList(owner=-1, ids=rank_order.astype(np.int64),
                      scores=cosine[rank_order])
