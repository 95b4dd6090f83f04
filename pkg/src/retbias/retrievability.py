"""Per-document retrievability: ``r(d) = sum_q weight_q * utility(rank of d for q)``.

Vector file (CSV)::

    # provenance=SQ1 utility=cumulative cutoff=100 beta=2.0 k1=1.2 b=0.75 queries=42 index=<hex>
    doc_id,score
    d1,3.0

Rows are sorted by ``doc_id`` and cover every indexed document.

Checkpoint file (binary, little-endian)::

    8 bytes   magic b"RBCKPT01"
    u32       length H of the JSON header
    H bytes   UTF-8 JSON: {"key", "queries_done", "n_docs"}
    n_docs x f64   partial scores in internal-id order
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .index import Bm25Params, InvertedIndex, top_docs
from .querygen import Query, QuerySet

log = logging.getLogger(__name__)

CUMULATIVE = "cumulative"
GRAVITY = "gravity"


@dataclass(frozen=True)
class UtilityFunction:
    kind: str = CUMULATIVE
    c: int = 100
    beta: float = 2.0

    def __post_init__(self):
        if self.kind not in (CUMULATIVE, GRAVITY):
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.c < 1:
            raise ValueError("cutoff c must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def __call__(self, k: int) -> float:
        return utility(self.kind, k, self.c, self.beta)

    def by_rank(self, n: int) -> np.ndarray:
        """Utilities for ranks 1..n (n <= c)."""
        ranks = np.arange(1, n + 1, dtype=np.float64)
        if self.kind == CUMULATIVE:
            return np.ones(n)
        return 1.0 / ranks**self.beta


def utility(kind: str, k: int, c: int, beta: float = 2.0) -> float:
    if k < 1:
        raise ValueError("rank k must be >= 1")
    if k > c:
        return 0.0
    if kind == CUMULATIVE:
        return 1.0
    if kind == GRAVITY:
        return 1.0 / k**beta
    raise ValueError(f"unknown utility kind {kind!r}")


@dataclass(frozen=True)
class VectorMeta:
    provenance: str
    utility: UtilityFunction
    params: Bm25Params
    query_count: int
    index_fingerprint: str

    def compatible(self, other: "VectorMeta") -> bool:
        return (self.utility, self.params, self.index_fingerprint) == (
            other.utility, other.params, other.index_fingerprint)

    def header(self) -> str:
        u, p = self.utility, self.params
        return (f"# provenance={self.provenance} utility={u.kind} cutoff={u.c} beta={u.beta!r} "
                f"k1={p.k1!r} b={p.b!r} queries={self.query_count} index={self.index_fingerprint}")

    @classmethod
    def parse(cls, line: str) -> "VectorMeta":
        kv = dict(item.split("=", 1) for item in line.lstrip("#").split())
        try:
            return cls(kv["provenance"], UtilityFunction(kv["utility"], int(kv["cutoff"]), float(kv["beta"])),
                       Bm25Params(float(kv["k1"]), float(kv["b"])), int(kv["queries"]), kv["index"])
        except (KeyError, ValueError) as e:
            raise DataError(f"bad vector header: {e}") from None


class RetrievabilityVector:
    """Dense scores over all documents, aligned with ``doc_ids`` (ascending)."""

    def __init__(self, doc_ids: Sequence[str], scores, meta: VectorMeta):
        self.doc_ids = list(doc_ids)
        self.scores = np.asarray(scores, dtype=np.float64)
        self.meta = meta
        if len(self.doc_ids) != len(self.scores):
            raise ValueError("doc_ids and scores differ in length")

    def __len__(self):
        return len(self.doc_ids)

    def __eq__(self, other):
        return (isinstance(other, RetrievabilityVector) and self.doc_ids == other.doc_ids
                and self.meta == other.meta and self.scores.tobytes() == other.scores.tobytes())

    @property
    def total(self) -> float:
        return float(self.scores.sum())

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.doc_ids, self.scores.tolist()))

    def normalized(self) -> "RetrievabilityVector":
        """Scores divided by the query count (uniform query likelihood 1/|Q|)."""
        q = self.meta.query_count
        return RetrievabilityVector(self.doc_ids, self.scores / q if q else self.scores.copy(), self.meta)

    def to_csv(self) -> str:
        order = sorted(range(len(self.doc_ids)), key=self.doc_ids.__getitem__)
        rows = [self.meta.header(), "doc_id,score"]
        rows += [f"{self.doc_ids[i]},{float(self.scores[i])!r}" for i in order]
        return "\n".join(rows) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8")
        return path

    @classmethod
    def read(cls, path: str | Path) -> "RetrievabilityVector":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if len(lines) < 2 or not lines[0].startswith("#") or lines[1] != "doc_id,score":
            raise DataError(f"{path}: not a retrievability vector file")
        meta = VectorMeta.parse(lines[0])
        ids, scores = [], []
        for lineno, line in enumerate(lines[2:], 3):
            doc_id, sep, score = line.rpartition(",")
            if not sep:
                raise DataError(f"{path}:{lineno}: malformed row")
            ids.append(doc_id)
            scores.append(float(score))
        return cls(ids, scores, meta)


def zero_vector(idx: InvertedIndex, params: Bm25Params, u: UtilityFunction, provenance: str = "-") -> RetrievabilityVector:
    return RetrievabilityVector(idx.doc_ids, np.zeros(idx.N), VectorMeta(provenance, u, params, 0, idx.fingerprint()))


def accumulate_scores(idx: InvertedIndex, params: Bm25Params, queries: Sequence[Query],
                      u: UtilityFunction) -> np.ndarray:
    """Scores in internal-id order for a batch of queries."""
    scores = np.zeros(idx.N)
    table = u.by_rank(u.c)
    for q in queries:
        if q.weight == 0:
            continue
        docs, _ = top_docs(idx, params, q.terms, u.c, q.mode)
        if len(docs):
            # docs are distinct within one ranking
            scores[docs] += q.weight * table[:len(docs)]
    return scores


def accumulate(idx: InvertedIndex, params: Bm25Params, qs: QuerySet, u: UtilityFunction) -> RetrievabilityVector:
    scores = accumulate_scores(idx, params, qs.queries, u)
    return RetrievabilityVector(idx.doc_ids, scores, VectorMeta(qs.provenance, u, params, len(qs), idx.fingerprint()))


def merge(a: RetrievabilityVector, b: RetrievabilityVector) -> RetrievabilityVector:
    if not a.meta.compatible(b.meta) or a.doc_ids != b.doc_ids:
        raise DataError("cannot merge vectors from different index, BM25 parameters or utility")
    prov = a.meta.provenance if a.meta.provenance == b.meta.provenance else f"{a.meta.provenance}+{b.meta.provenance}"
    meta = replace(a.meta, provenance=prov, query_count=a.meta.query_count + b.meta.query_count)
    return RetrievabilityVector(a.doc_ids, a.scores + b.scores, meta)


# --- chunked, parallel, resumable execution ------------------------------

_MAGIC = b"RBCKPT01"


def write_checkpoint(path: Path, key: str, queries_done: int, scores: np.ndarray) -> None:
    header = json.dumps({"key": key, "queries_done": queries_done, "n_docs": len(scores)}).encode()
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<I", len(header)) + header)
        fh.write(np.asarray(scores, dtype="<f8").tobytes())
    os.replace(tmp, path)


def read_checkpoint(path: Path) -> tuple[str, int, np.ndarray]:
    data = Path(path).read_bytes()
    if not data.startswith(_MAGIC):
        raise DataError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack_from("<I", data, len(_MAGIC))
    start = len(_MAGIC) + 4
    header = json.loads(data[start:start + hlen])
    scores = np.frombuffer(data[start + hlen:], dtype="<f8").astype(np.float64)
    if len(scores) != header["n_docs"]:
        raise DataError(f"{path}: truncated checkpoint")
    return header["key"], header["queries_done"], scores


_worker_state: tuple | None = None


def _init_worker(idx, params, u):
    global _worker_state
    _worker_state = (idx, params, u)


def _score_chunk(idx, params, queries, u) -> np.ndarray:
    return accumulate_scores(idx, params, queries, u)


def _worker_chunk(queries):
    idx, params, u = _worker_state
    return _score_chunk(idx, params, queries, u)


def run_key(idx: InvertedIndex, params: Bm25Params, qs: QuerySet, u: UtilityFunction, chunk_size: int) -> str:
    h = hashlib.sha256()
    h.update(repr((idx.fingerprint(), params, u, chunk_size)).encode())
    h.update(qs.to_tsv().encode())
    return h.hexdigest()[:16]


def run_queries(idx: InvertedIndex, params: Bm25Params, qs: QuerySet, u: UtilityFunction, *,
                workers: int = 1, chunk_size: int = 2000, checkpoint: str | Path | None = None) -> RetrievabilityVector:
    """Accumulate ``qs`` in fixed-size chunks merged in order.

    The chunking does not depend on ``workers``, so the result is
    byte-identical for any worker count. With ``checkpoint`` set, the partial
    vector is persisted after every chunk and a matching checkpoint is resumed.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    queries = qs.queries
    chunks = [queries[i:i + chunk_size] for i in range(0, len(queries), chunk_size)]
    total = np.zeros(idx.N)
    done = 0
    ckpt = Path(checkpoint) if checkpoint else None
    key = run_key(idx, params, qs, u, chunk_size) if ckpt else ""
    if ckpt and ckpt.exists():
        found_key, found_done, partial = read_checkpoint(ckpt)
        if found_key == key and len(partial) == idx.N:
            total, done = partial, found_done
            log.info("resuming from %s after %d queries", ckpt, done)
        else:
            log.warning("ignoring stale checkpoint %s", ckpt)
    first = done // chunk_size
    remaining = chunks[first:]

    def consume(results):
        nonlocal total, done
        for chunk, partial in zip(remaining, results):
            total = total + partial
            done += len(chunk)
            if ckpt:
                write_checkpoint(ckpt, key, done, total)

    if workers <= 1 or len(remaining) <= 1:
        consume(_score_chunk(idx, params, ch, u) for ch in remaining)
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(idx, params, u)) as pool:
            consume(pool.map(_worker_chunk, remaining))
    if ckpt and ckpt.exists():
        ckpt.unlink()
    return RetrievabilityVector(idx.doc_ids, total, VectorMeta(qs.provenance, u, params, len(qs), idx.fingerprint()))
