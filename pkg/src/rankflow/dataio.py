"""File ingestion and export: feature tables, distances, lists, labels.

Formats (documented bit-exactly in docs/formats.md):

* feature/distance tables: delimited text with a header line, or raw
  little-endian binary with a (rows, cols) uint64 header followed by
  float32 values. Text cells round-trip exactly through repr().
* ranked lists: one line per query, `<query_id>: <id_1> <id_2> ...`
* labels: one `<id> <label>` pair per line
* embeddings: delimited text, identifier first column
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputDataError
from .ranking import RankedLists

__all__ = [
    "FeatureTable",
    "load_features",
    "save_features",
    "compute_distances",
    "load_ranked_lists",
    "save_ranked_lists",
    "load_labels",
    "labels_for",
    "save_embeddings",
    "load_embeddings",
]

BINARY_HEADER = "<QQ"


@dataclass(frozen=True)
class FeatureTable:
    """Rectangular table of finite reals with optional unique identifiers."""

    values: np.ndarray
    ids: list | None = None

    def __post_init__(self):
        if self.values.ndim != 2:
            raise InputDataError("feature table must be 2-dimensional")
        if self.ids is not None:
            if len(self.ids) != self.values.shape[0]:
                raise InputDataError("one identifier per row required")
            if len(set(self.ids)) != len(self.ids):
                dupes = sorted({i for i in self.ids if self.ids.count(i) > 1})
                raise InputDataError(f"duplicate identifiers: {dupes[:5]}")
        bad = ~np.isfinite(self.values)
        if np.any(bad):
            row = int(np.flatnonzero(bad.any(axis=1))[0])
            raise InputDataError(f"non-finite value in row {row}")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def row_ids(self) -> list:
        return self.ids if self.ids is not None else [str(i) for i in range(self.n)]


def _split(line: str, delimiter: str):
    return [c for c in line.strip().split(delimiter) if c != ""] \
        if delimiter != "," else [c.strip() for c in line.strip().split(",")]


def _sniff_delimiter(line: str) -> str:
    return "," if "," in line else None  # None -> any whitespace


def _parse_text_table(path) -> FeatureTable:
    with open(path, "rt", encoding="utf-8") as f:
        raw = [line.rstrip("\n") for line in f]
    lines = [(no + 1, line) for no, line in enumerate(raw)
             if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise InputDataError(f"{path}: empty table")
    header_no, header = lines[0]
    delim = _sniff_delimiter(header)
    columns = header.split(delim) if delim else header.split()
    columns = [c.strip() for c in columns if c.strip()]
    has_ids = bool(columns) and columns[0].lower() == "id"
    width = len(columns)

    ids = [] if has_ids else None
    seen = set()
    rows = []
    for no, line in lines[1:]:
        cells = line.split(delim) if delim else line.split()
        cells = [c.strip() for c in cells if c.strip()]
        if len(cells) != width:
            raise InputDataError(
                f"{path}:{no}: expected {width} columns, found {len(cells)}"
            )
        if has_ids:
            if cells[0] in seen:
                raise InputDataError(
                    f"{path}:{no}: duplicate identifier {cells[0]!r}"
                )
            seen.add(cells[0])
            ids.append(cells[0])
            cells = cells[1:]
        try:
            row = [float(c) for c in cells]
        except ValueError as exc:
            raise InputDataError(f"{path}:{no}: {exc}") from exc
        if any(math.isnan(v) or math.isinf(v) for v in row):
            raise InputDataError(f"{path}:{no}: non-finite value")
        rows.append(row)
    if not rows:
        raise InputDataError(f"{path}: header but no data rows")
    values = np.asarray(rows, dtype=np.float64)
    return FeatureTable(values=values, ids=ids)


def _parse_binary_table(path) -> FeatureTable:
    import struct
    with open(path, "rb") as f:
        head = f.read(16)
        if len(head) != 16:
            raise InputDataError(f"{path}: truncated binary header")
        n, d = struct.unpack(BINARY_HEADER, head)
        body = f.read()
    expected = n * d * 4
    if len(body) != expected:
        raise InputDataError(
            f"{path}: expected {expected} payload bytes for ({n}, {d}), "
            f"found {len(body)}"
        )
    values = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(n, d)
    return FeatureTable(values=values, ids=None)


def _looks_binary(path) -> bool:
    import os
    import struct
    size = os.path.getsize(path)
    if size < 16:
        return False
    with open(path, "rb") as f:
        n, d = struct.unpack(BINARY_HEADER, f.read(16))
    return size == 16 + n * d * 4 and n > 0 and d > 0


def load_features(path, fmt: str = "auto") -> FeatureTable:
    """Load a table; `fmt` is "text", "binary" or "auto" (sniffed)."""
    if fmt == "auto":
        fmt = "binary" if _looks_binary(path) else "text"
    if fmt == "binary":
        return _parse_binary_table(path)
    if fmt == "text":
        return _parse_text_table(path)
    raise ConfigurationError(f"unknown table format {fmt!r}")


def save_features(table: FeatureTable, path, fmt: str = "text",
                  delimiter: str = "\t"):
    if fmt == "binary":
        import struct
        with open(path, "wb") as f:
            f.write(struct.pack(BINARY_HEADER, table.n, table.dim))
            f.write(table.values.astype("<f4").tobytes())
        return
    if fmt != "text":
        raise ConfigurationError(f"unknown table format {fmt!r}")
    with open(path, "wt", encoding="utf-8") as f:
        cols = [f"f{j}" for j in range(table.dim)]
        if table.ids is not None:
            f.write(delimiter.join(["id"] + cols) + "\n")
            for i in range(table.n):
                cells = [table.ids[i]] + [repr(float(v)) for v in table.values[i]]
                f.write(delimiter.join(cells) + "\n")
        else:
            f.write(delimiter.join(cols) + "\n")
            for i in range(table.n):
                f.write(delimiter.join(repr(float(v)) for v in table.values[i])
                        + "\n")


def compute_distances(features: FeatureTable, metric: str = "euclidean",
                      queries: FeatureTable | None = None) -> np.ndarray:
    """Exhaustive pairwise distances (rows of `queries` vs the collection).

    Without `queries` this is the collection against itself, with an exact
    zero diagonal. Cosine distance rejects zero-norm vectors.
    """
    a = features.values if queries is None else queries.values
    b = features.values
    if a.shape[1] != b.shape[1]:
        raise InputDataError(
            f"dimensionality mismatch: {a.shape[1]} vs {b.shape[1]}"
        )
    if metric == "euclidean":
        aa = np.add.reduce(a * a, axis=1)
        bb = np.add.reduce(b * b, axis=1)
        sq = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
        np.maximum(sq, 0.0, out=sq)
        dist = np.sqrt(sq)
    elif metric == "cosine":
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        if np.any(na == 0.0) or np.any(nb == 0.0):
            row = int(np.flatnonzero(
                (na if np.any(na == 0.0) else nb) == 0.0
            )[0])
            raise InputDataError(
                f"zero-norm vector (row {row}) under cosine distance"
            )
        dist = 1.0 - (a @ b.T) / na[:, None] / nb[None, :]
        np.maximum(dist, 0.0, out=dist)
    else:
        raise ConfigurationError(f"unknown distance metric {metric!r}")
    if queries is None:
        np.fill_diagonal(dist, 0.0)
    return dist


def load_ranked_lists(path) -> tuple[RankedLists, list]:
    """Read `<query_id>: <id_1> <id_2> ...` lines.

    The object universe is the set of query ids in file order; every
    referenced id must appear as a query. Scores are synthesized strictly
    descending (list length down to 1) so load -> write -> load is exactly
    idempotent; the text format itself carries no scores.
    """
    with open(path, "rt", encoding="utf-8") as f:
        raw = [line.rstrip("\n") for line in f]
    lines = [(no + 1, line) for no, line in enumerate(raw) if line.strip()]
    if not lines:
        raise InputDataError(f"{path}: empty ranked-list file")

    ids = []
    entries = []
    for no, line in lines:
        if ":" not in line:
            raise InputDataError(f"{path}:{no}: missing ':' separator")
        qid, _, rest = line.partition(":")
        qid = qid.strip()
        if not qid:
            raise InputDataError(f"{path}:{no}: empty query id")
        ids.append(qid)
        entries.append((no, rest.split()))
    if len(set(ids)) != len(ids):
        raise InputDataError(f"{path}: duplicate query id")
    index_of = {obj: i for i, obj in enumerate(ids)}

    n = len(ids)
    out_ids, out_scores = [], []
    for no, tokens in entries:
        try:
            row = np.asarray([index_of[t] for t in tokens], dtype=np.int64)
        except KeyError as exc:
            raise InputDataError(
                f"{path}:{no}: unknown object id {exc.args[0]!r}"
            ) from exc
        if np.unique(row).shape[0] != row.shape[0]:
            raise InputDataError(f"{path}:{no}: duplicate object in list")
        out_ids.append(row)
        out_scores.append(
            np.arange(row.shape[0], 0, -1, dtype=np.float64)
        )
    depth = max((r.shape[0] for r in out_ids), default=1)
    return RankedLists(n=n, depth=depth, ids=out_ids, scores=out_scores), ids


def save_ranked_lists(lists: RankedLists, path, ids: list | None = None,
                      owners: list | None = None):
    """Write lists in the text format; `ids` maps indices to identifiers.

    `owners` overrides the per-line query identifiers (used when the
    queries are not part of the collection).
    """
    names = ids if ids is not None else [str(i) for i in range(lists.n)]
    with open(path, "wt", encoding="utf-8") as f:
        for q in range(lists.n):
            qid = owners[q] if owners is not None else names[q]
            f.write(f"{qid}: " + " ".join(names[j] for j in lists.ids[q]) + "\n")


def load_labels(path) -> dict:
    """Read `<id> <label>` lines (comma or whitespace separated)."""
    out = {}
    with open(path, "rt", encoding="utf-8") as f:
        for no, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            delim = _sniff_delimiter(line)
            cells = [c.strip() for c in
                     (line.split(delim) if delim else line.split())]
            if len(cells) != 2:
                raise InputDataError(f"{path}:{no}: expected '<id> <label>'")
            if cells[0] in out:
                raise InputDataError(f"{path}:{no}: duplicate id {cells[0]!r}")
            out[cells[0]] = cells[1]
    if not out:
        raise InputDataError(f"{path}: no labels")
    return out


def labels_for(ids: list, table: dict) -> np.ndarray:
    """Label array aligned with `ids`; every id must be labeled."""
    missing = [i for i in ids if i not in table]
    if missing:
        raise InputDataError(f"unlabeled identifiers: {missing[:5]}")
    return np.asarray([table[i] for i in ids])


def save_embeddings(matrix: np.ndarray, path, ids: list | None = None,
                    delimiter: str = "\t"):
    """Delimited text, identifier first; floats round-trip via repr()."""
    names = ids if ids is not None else [str(i) for i in range(matrix.shape[0])]
    with open(path, "wt", encoding="utf-8") as f:
        for i in range(matrix.shape[0]):
            cells = [str(names[i])] + [repr(float(v)) for v in matrix[i]]
            f.write(delimiter.join(cells) + "\n")


def load_embeddings(path) -> tuple[np.ndarray, list]:
    ids, rows = [], []
    width = None
    with open(path, "rt", encoding="utf-8") as f:
        for no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            cells = line.split()
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise InputDataError(
                    f"{path}:{no}: expected {width} columns, found {len(cells)}"
                )
            ids.append(cells[0])
            try:
                rows.append([float(c) for c in cells[1:]])
            except ValueError as exc:
                raise InputDataError(f"{path}:{no}: {exc}") from exc
    if not rows:
        raise InputDataError(f"{path}: empty embedding file")
    return np.asarray(rows, dtype=np.float64), ids
