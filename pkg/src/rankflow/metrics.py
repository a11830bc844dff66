"""Retrieval effectiveness measures.

All measures consume ranked lists of object ids plus a relevance oracle.
Three query protocols are supported: whole-collection with the query
counted as its own relevant match (the default, consistent with the
top-4 score where the query sits at rank 1), whole-collection with the
query removed from both the list and the relevant set, and a separate
query-versus-gallery split.

Queries with no relevant object are excluded from aggregate measures with
a warning rather than failing the whole evaluation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputDataError
from .ranking import RankedLists, RankedList

__all__ = [
    "RelevanceOracle",
    "average_precision",
    "mean_average_precision",
    "precision_at",
    "recall_at",
    "ns_score",
    "cmc_r1",
    "format_report",
]

MODES = ("self-included", "self-excluded", "gallery")


@dataclass(frozen=True)
class RelevanceOracle:
    """Maps a query to its relevant objects under a chosen protocol."""

    mode: str
    labels: np.ndarray | None = None
    query_labels: np.ndarray | None = None
    relevant_sets: dict | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(
                f"mode must be one of {MODES}, got {self.mode!r}"
            )
        if self.mode == "gallery" and self.relevant_sets is None \
                and self.query_labels is None:
            raise ConfigurationError("gallery mode needs query labels")

    @classmethod
    def from_labels(cls, labels, mode: str = "self-included",
                    query_labels=None) -> "RelevanceOracle":
        labels = np.asarray(labels)
        q = None if query_labels is None else np.asarray(query_labels)
        return cls(mode=mode, labels=labels, query_labels=q)

    @classmethod
    def from_relevant_sets(cls, relevant: dict,
                           mode: str = "self-included") -> "RelevanceOracle":
        return cls(mode=mode, relevant_sets={
            q: np.asarray(sorted(v), dtype=np.int64)
            for q, v in relevant.items()
        })

    def _relevant_ids(self, q: int) -> np.ndarray:
        if self.relevant_sets is not None:
            ids = self.relevant_sets.get(q, np.zeros(0, np.int64))
        elif self.mode == "gallery":
            ids = np.flatnonzero(self.labels == self.query_labels[q])
        else:
            ids = np.flatnonzero(self.labels == self.labels[q])
        if self.mode == "self-excluded":
            ids = ids[ids != q]
        return ids

    def prepare_list(self, q: int, ids: np.ndarray) -> np.ndarray:
        """The evaluated ordering (drops the query itself when excluded)."""
        if self.mode == "self-excluded":
            return ids[ids != q]
        return ids

    def relevant_mask(self, q: int, ids: np.ndarray) -> np.ndarray:
        return np.isin(ids, self._relevant_ids(q))

    def relevant_count(self, q: int) -> int:
        return int(self._relevant_ids(q).shape[0])


def _iter_lists(lists):
    if isinstance(lists, RankedLists):
        for q in range(lists.n):
            yield q, lists.ids[q]
    else:
        for rl in lists:
            if isinstance(rl, RankedList):
                yield rl.owner, rl.ids
            else:
                q, ids = rl
                yield q, np.asarray(ids, dtype=np.int64)


def average_precision(ids, q: int, oracle: RelevanceOracle) -> float:
    """Mean of precision-at-p over the relevant positions p.

    Relevant objects missing from the ordering contribute zero (the
    denominator is the oracle's full relevant count).
    """
    ids = oracle.prepare_list(q, np.asarray(ids, dtype=np.int64))
    if ids.shape[0] == 0:
        raise InputDataError(f"query {q}: empty ranked list")
    total = oracle.relevant_count(q)
    if total == 0:
        raise InputDataError(f"query {q}: no relevant object under the oracle")
    rel = oracle.relevant_mask(q, ids)
    hits = np.cumsum(rel)
    positions = np.arange(1, ids.shape[0] + 1)
    # plain running sum in position order: bit-identical to a naive loop
    acc = 0.0
    for term in hits[rel] / positions[rel]:
        acc += term
    return acc / total


def mean_average_precision(lists, oracle: RelevanceOracle) -> float:
    values = []
    for q, ids in _iter_lists(lists):
        if oracle.relevant_count(q) == 0:
            warnings.warn(f"query {q} has no relevant object; excluded from MAP")
            continue
        values.append(average_precision(ids, q, oracle))
    if not values:
        raise InputDataError("no evaluable query")
    return float(np.mean(values))


def _prefix(ids, q, oracle, at: int) -> np.ndarray:
    ids = oracle.prepare_list(q, np.asarray(ids, dtype=np.int64))
    if at > ids.shape[0]:
        warnings.warn(
            f"query {q}: cutoff {at} exceeds list length {ids.shape[0]}; "
            "using the available prefix"
        )
    return ids[:at]


def precision_at(ids, q: int, oracle: RelevanceOracle, at: int) -> float:
    """Fraction of the top-`at` entries that are relevant."""
    if at < 1:
        raise ConfigurationError(f"cutoff must be >= 1, got {at}")
    head = _prefix(ids, q, oracle, at)
    return float(np.count_nonzero(oracle.relevant_mask(q, head)) / at)


def recall_at(ids, q: int, oracle: RelevanceOracle, at: int) -> float:
    """Fraction of the relevant set retrieved within the top `at`."""
    if at < 1:
        raise ConfigurationError(f"cutoff must be >= 1, got {at}")
    total = oracle.relevant_count(q)
    if total == 0:
        raise InputDataError(f"query {q}: no relevant object under the oracle")
    head = _prefix(ids, q, oracle, at)
    return float(np.count_nonzero(oracle.relevant_mask(q, head)) / total)


def mean_precision_at(lists, oracle: RelevanceOracle, at: int) -> float:
    values = [precision_at(ids, q, oracle, at) for q, ids in _iter_lists(lists)
              if oracle.relevant_count(q) > 0]
    if not values:
        raise InputDataError("no evaluable query")
    return float(np.mean(values))


def mean_recall_at(lists, oracle: RelevanceOracle, at: int) -> float:
    values = [recall_at(ids, q, oracle, at) for q, ids in _iter_lists(lists)
              if oracle.relevant_count(q) > 0]
    if not values:
        raise InputDataError("no evaluable query")
    return float(np.mean(values))


def ns_score(lists, oracle: RelevanceOracle) -> float:
    """Mean number of relevant objects in the top 4 positions (max 4).

    Intended for 4-per-class collections under the self-included protocol,
    where a perfect ranker scores exactly 4.0.
    """
    counts = []
    for q, ids in _iter_lists(lists):
        head = oracle.prepare_list(q, np.asarray(ids, dtype=np.int64))[:4]
        counts.append(np.count_nonzero(oracle.relevant_mask(q, head)))
    if not counts:
        raise InputDataError("no evaluable query")
    return float(np.mean(counts))


def cmc_r1(query_lists, oracle: RelevanceOracle) -> float:
    """Fraction of queries whose first-ranked item shares their identity."""
    hits, evaluated = 0, 0
    for q, ids in _iter_lists(query_lists):
        if oracle.relevant_count(q) == 0:
            warnings.warn(f"query {q} has no gallery match; excluded from R1")
            continue
        ids = oracle.prepare_list(q, np.asarray(ids, dtype=np.int64))
        if ids.shape[0] == 0:
            raise InputDataError(f"query {q}: empty ranked list")
        hits += bool(oracle.relevant_mask(q, ids[:1])[0])
        evaluated += 1
    if evaluated == 0:
        raise InputDataError("no evaluable query")
    return hits / evaluated


def format_report(values: dict) -> str:
    """One tab-separated key-value line per metric (also machine-readable)."""
    return "".join(f"{key}\t{value:.6f}\n" for key, value in values.items())
