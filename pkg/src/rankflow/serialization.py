"""Versioned binary container for persisted indexes.

Layout (everything little-endian; see docs/formats.md for the full spec):

    magic   8 bytes  b"RFEINDEX"
    version u32      currently 1
    config  u64 length + UTF-8 JSON
    count   u32      number of sections
    section repeated: u16 name length + UTF-8 name, u8 kind, payload

Section kinds: 1 sparse matrix, 2 ranked lists, 3 dense matrix, 4 vector.
Floats are 64-bit, integers in payloads are 64-bit unless stated.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from .errors import InputDataError
from .ranking import RankedLists, SparseScores
from .hypergraph import HypergraphState

MAGIC = b"RFEINDEX"
VERSION = 1

KIND_SPARSE = 1
KIND_LISTS = 2
KIND_DENSE = 3
KIND_VECTOR = 4

__all__ = ["save_index", "load_index"]


def _w(f, fmt, *vals):
    f.write(struct.pack("<" + fmt, *vals))


def _r(f, fmt):
    size = struct.calcsize("<" + fmt)
    raw = f.read(size)
    if len(raw) != size:
        raise InputDataError("truncated index file")
    return struct.unpack("<" + fmt, raw)


def _write_array(f, arr, dtype):
    f.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def _read_array(f, count, dtype):
    dtype = np.dtype(dtype)
    raw = f.read(count * dtype.itemsize)
    if len(raw) != count * dtype.itemsize:
        raise InputDataError("truncated index file")
    return np.frombuffer(raw, dtype=dtype).copy()


def write_sparse(f, n_rows: int, n_cols: int, indptr, indices, data):
    nnz = int(indices.shape[0])
    _w(f, "QQQ", n_rows, n_cols, nnz)
    _write_array(f, indptr, "<i8")
    _write_array(f, indices, "<i8")
    _write_array(f, data, "<f8")


def read_sparse(f):
    n_rows, n_cols, nnz = _r(f, "QQQ")
    indptr = _read_array(f, n_rows + 1, "<i8")
    indices = _read_array(f, nnz, "<i8")
    data = _read_array(f, nnz, "<f8")
    return n_rows, n_cols, indptr, indices, data


def write_lists(f, lists: RankedLists):
    _w(f, "QQ", lists.n, lists.depth)
    for q in range(lists.n):
        _w(f, "Q", lists.ids[q].shape[0])
        _write_array(f, lists.ids[q], "<i8")
        _write_array(f, lists.scores[q], "<f8")


def read_lists(f) -> RankedLists:
    n, depth = _r(f, "QQ")
    ids, scores = [], []
    for _ in range(n):
        (m,) = _r(f, "Q")
        ids.append(_read_array(f, m, "<i8"))
        scores.append(_read_array(f, m, "<f8"))
    return RankedLists(n=n, depth=depth, ids=ids, scores=scores)


def write_dense(f, mat: np.ndarray):
    _w(f, "QQ", mat.shape[0], mat.shape[1])
    _write_array(f, mat, "<f8")


def read_dense(f) -> np.ndarray:
    rows, cols = _r(f, "QQ")
    return _read_array(f, rows * cols, "<f8").reshape(rows, cols)


def write_vector(f, vec: np.ndarray):
    _w(f, "Q", vec.shape[0])
    _write_array(f, vec, "<f8")


def read_vector(f) -> np.ndarray:
    (m,) = _r(f, "Q")
    return _read_array(f, m, "<f8")


def _write_section(f, name: str, kind: int, writer):
    encoded = name.encode("utf-8")
    _w(f, "H", len(encoded))
    f.write(encoded)
    _w(f, "B", kind)
    writer(f)


def save_index(index, path):
    from .pipeline import RfeConfig  # local import to avoid a cycle

    config = index.config
    config_doc = {
        "k": config.k, "depth": config.depth, "alpha": config.alpha,
        "iterations": config.iterations, "run_cc_stage": config.run_cc_stage,
        "emit_embeddings": config.emit_embeddings,
    }
    sections = [
        ("lists/final", KIND_LISTS, lambda f: write_lists(f, index.lists)),
        ("state/incidence", KIND_SPARSE,
         lambda f: write_sparse(f, index.state.incidence.n,
                                index.state.incidence.n,
                                index.state.incidence.indptr,
                                index.state.incidence.indices,
                                index.state.incidence.data)),
        ("state/embeddings", KIND_SPARSE,
         lambda f: write_sparse(f, index.state.embeddings.n,
                                index.state.embeddings.n,
                                index.state.embeddings.indptr,
                                index.state.embeddings.indices,
                                index.state.embeddings.data)),
        ("state/weights", KIND_VECTOR,
         lambda f: write_vector(f, index.state.edge_weights)),
    ]
    for name in sorted(index.stages):
        lists = index.stages[name]
        sections.append(
            (f"stage/{name}", KIND_LISTS,
             lambda f, lists=lists: write_lists(f, lists))
        )
    if index.embeddings is not None:
        sections.append(
            ("embeddings", KIND_DENSE,
             lambda f: write_dense(f, index.embeddings))
        )

    buf = io.BytesIO()
    buf.write(MAGIC)
    _w(buf, "I", VERSION)
    config_json = json.dumps(config_doc, sort_keys=True).encode("utf-8")
    _w(buf, "Q", len(config_json))
    buf.write(config_json)
    _w(buf, "I", len(sections))
    for name, kind, writer in sections:
        _write_section(buf, name, kind, writer)

    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_index(path):
    from .pipeline import RfeConfig, RfeIndex

    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise InputDataError(f"{path}: not an index file")
        (version,) = _r(f, "I")
        if version != VERSION:
            raise InputDataError(f"{path}: unsupported index version {version}")
        (config_len,) = _r(f, "Q")
        config_doc = json.loads(f.read(config_len).decode("utf-8"))
        (n_sections,) = _r(f, "I")

        sections = {}
        for _ in range(n_sections):
            (name_len,) = _r(f, "H")
            name = f.read(name_len).decode("utf-8")
            (kind,) = _r(f, "B")
            if kind == KIND_SPARSE:
                sections[name] = ("sparse", read_sparse(f))
            elif kind == KIND_LISTS:
                sections[name] = ("lists", read_lists(f))
            elif kind == KIND_DENSE:
                sections[name] = ("dense", read_dense(f))
            elif kind == KIND_VECTOR:
                sections[name] = ("vector", read_vector(f))
            else:
                raise InputDataError(f"{path}: unknown section kind {kind}")

    def sparse_of(name) -> SparseScores:
        tag, payload = sections[name]
        if tag != "sparse":
            raise InputDataError(f"{path}: section {name} has wrong kind")
        n_rows, n_cols, indptr, indices, data = payload
        if n_rows != n_cols:
            raise InputDataError(f"{path}: section {name} is not square")
        return SparseScores(n=n_rows, indptr=indptr, indices=indices, data=data)

    config = RfeConfig(
        k=config_doc["k"], depth=config_doc["depth"],
        alpha=config_doc["alpha"], iterations=config_doc["iterations"],
        run_cc_stage=config_doc["run_cc_stage"],
        emit_embeddings=config_doc["emit_embeddings"],
    )
    state = HypergraphState(
        incidence=sparse_of("state/incidence"),
        embeddings=sparse_of("state/embeddings"),
        edge_weights=sections["state/weights"][1],
        k=config.k,
    )
    stages = {
        name.split("/", 1)[1]: payload
        for name, (tag, payload) in sections.items()
        if name.startswith("stage/") and tag == "lists"
    }
    embeddings = None
    if "embeddings" in sections:
        embeddings = sections["embeddings"][1]
    return RfeIndex(config=config, lists=sections["lists/final"][1],
                    state=state, embeddings=embeddings, stages=stages)
