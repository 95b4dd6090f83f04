"""In-memory inverted index, BM25 scoring and top-c retrieval.

Internal document ids are assigned in ascending ``doc_id`` order, so ordering
by internal id is the same as the ``doc_id`` tie-break used for rankings.

Snapshot layout (one directory)::

    docs.tsv      header ``doc_id<TAB>length``, one row per internal id
    lexicon.tsv   header ``term<TAB>cf<TAB>df``, terms in code-point order
    postings.bin  magic ``RBPOSTV1`` then, for each lexicon term in order,
                  ``df`` pairs ``(doc_gap, tf)`` as unsigned LEB128 varints
                  (7 bits per byte, least significant group first, high bit
                  set on every byte except the last). ``doc_gap`` is the
                  internal id for the first posting and the difference to the
                  previous id afterwards.
    meta.json     counts plus preprocessing and content fingerprints
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

DISJUNCTIVE = "disjunctive"
CONJUNCTIVE = "conjunctive"
MODES = (DISJUNCTIVE, CONJUNCTIVE)
_MAGIC = b"RBPOSTV1"


@dataclass(frozen=True, slots=True)
class TermStats:
    term: str
    cf: int
    df: int


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if not self.k1 > 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise ValueError(f"b must lie in [0, 1], got {self.b}")


@dataclass(frozen=True)
class RankedList:
    entries: tuple[tuple[str, float], ...]
    cutoff: int

    def __len__(self):
        return len(self.entries)

    @property
    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.entries]


class InvertedIndex:
    """Immutable postings plus collection statistics.

    ``postings[term]`` is a pair of int arrays ``(doc_internal_ids, tfs)``
    sorted by internal id.
    """

    def __init__(self, doc_ids, lengths, postings, preprocess_fingerprint=None):
        self.doc_ids: list[str] = list(doc_ids)
        self.lengths = np.asarray(lengths, dtype=np.int64)
        self.postings: dict[str, tuple[np.ndarray, np.ndarray]] = postings
        self.preprocess_fingerprint = preprocess_fingerprint
        self.N = len(self.doc_ids)
        self.avgdl = float(self.lengths.mean()) if self.N else 0.0
        self.lexicon = {
            t: TermStats(t, int(tfs.sum()), len(docs)) for t, (docs, tfs) in sorted(postings.items())
        }
        self._by_id = {d: i for i, d in enumerate(self.doc_ids)}
        self._impacts: dict[Bm25Params, dict[str, np.ndarray]] = {}
        self._fingerprint: str | None = None

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_impacts"] = {}
        return state

    def internal_id(self, doc_id: str) -> int:
        return self._by_id[doc_id]

    def idf(self, term: str) -> float:
        df = self.lexicon[term].df
        return math.log(1 + (self.N - df + 0.5) / (df + 0.5))

    def impacts(self, params: Bm25Params) -> dict[str, np.ndarray]:
        """Per-posting BM25 contributions, aligned with ``postings[term][0]``."""
        cached = self._impacts.get(params)
        if cached is None:
            k1, b = params.k1, params.b
            avgdl = self.avgdl or 1.0
            norm = k1 * (1 - b + b * self.lengths / avgdl)
            cached = {}
            for term, (docs, tfs) in self.postings.items():
                tf = tfs.astype(np.float64)
                cached[term] = self.idf(term) * (tf * (k1 + 1) / (tf + norm[docs]))
            self._impacts[params] = cached
        return cached

    def fingerprint(self) -> str:
        """Content digest of the document table and postings."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            h.update(_docs_tsv(self).encode())
            h.update(_lexicon_tsv(self).encode())
            h.update(_encode_postings(self))
            self._fingerprint = h.hexdigest()[:16]
        return self._fingerprint

    def stats(self) -> dict:
        return {"n_docs": self.N, "avgdl": self.avgdl, "vocab_size": len(self.lexicon)}


def build_index(docs: Iterable, preprocess_fingerprint: str | None = None) -> InvertedIndex:
    """Index a stream of preprocessed documents (objects with ``doc_id``/``terms``)."""
    counts: dict[str, Counter] = {}
    for doc in docs:
        if doc.doc_id in counts:
            raise DataError(f"duplicate doc_id {doc.doc_id!r}")
        counts[doc.doc_id] = Counter(doc.terms)
    doc_ids = sorted(counts)
    lengths = [sum(counts[d].values()) for d in doc_ids]
    plists: dict[str, tuple[list, list]] = defaultdict(lambda: ([], []))
    for internal, d in enumerate(doc_ids):
        for term, tf in counts[d].items():
            pl = plists[term]
            pl[0].append(internal)
            pl[1].append(tf)
    postings = {
        t: (np.asarray(ds, dtype=np.int32), np.asarray(tfs, dtype=np.int32)) for t, (ds, tfs) in plists.items()
    }
    return InvertedIndex(doc_ids, lengths, postings, preprocess_fingerprint)


def bm25_score(idx: InvertedIndex, params: Bm25Params, terms: Sequence[str], doc: int) -> float:
    """Score one document for a term multiset by direct evaluation."""
    if not 0 <= doc < idx.N:
        raise KeyError(f"unknown internal document id {doc}")
    k1, b = params.k1, params.b
    norm = k1 * (1 - b + b * idx.lengths[doc] / (idx.avgdl or 1.0))
    score = 0.0
    for term in terms:
        pl = idx.postings.get(term)
        if pl is None:
            continue
        docs, tfs = pl
        pos = np.searchsorted(docs, doc)
        if pos == len(docs) or docs[pos] != doc:
            continue
        tf = float(tfs[pos])
        score += idx.idf(term) * (tf * (k1 + 1) / (tf + norm))
    return score


def _candidates(idx: InvertedIndex, params: Bm25Params, query: Sequence[str], mode: str):
    impacts = idx.impacts(params)
    if mode == CONJUNCTIVE:
        if any(t not in idx.postings for t in query):
            return None
        docs = idx.postings[query[0]][0]
        for t in query[1:]:
            docs = np.intersect1d(docs, idx.postings[t][0], assume_unique=True)
            if not len(docs):
                return None
        scores = np.zeros(len(docs))
        for t in query:
            pd = idx.postings[t][0]
            scores += impacts[t][np.searchsorted(pd, docs)]
        return docs, scores
    if mode != DISJUNCTIVE:
        raise ValueError(f"unknown retrieval mode {mode!r}")
    present = [t for t in query if t in idx.postings]
    if not present:
        return None
    if len(present) == 1:
        t = present[0]
        return idx.postings[t][0], impacts[t]
    all_docs = np.concatenate([idx.postings[t][0] for t in present])
    all_imp = np.concatenate([impacts[t] for t in present])
    docs, inv = np.unique(all_docs, return_inverse=True)
    # bincount sums in input order, i.e. query-term order
    return docs, np.bincount(inv, weights=all_imp, minlength=len(docs))


def top_docs(idx: InvertedIndex, params: Bm25Params, query: Sequence[str], c: int, mode: str = DISJUNCTIVE):
    """Top-``c`` internal ids and scores, by score desc then internal id asc."""
    found = _candidates(idx, params, query, mode)
    if found is None:
        return np.empty(0, dtype=np.int64), np.empty(0)
    docs, scores = found
    if len(docs) > c:
        kth = np.partition(scores, len(scores) - c)[len(scores) - c]
        keep = scores >= kth
        docs, scores = docs[keep], scores[keep]
    order = np.lexsort((docs, -scores))[:c]
    return docs[order], scores[order]


def retrieve(idx: InvertedIndex, params: Bm25Params, query: Sequence[str], c: int, mode: str = DISJUNCTIVE) -> RankedList:
    if c < 1:
        raise ValueError("cutoff c must be >= 1")
    if not query:
        raise ValueError("query must contain at least one term")
    docs, scores = top_docs(idx, params, list(query), c, mode)
    return RankedList(tuple((idx.doc_ids[d], float(s)) for d, s in zip(docs, scores)), c)


# --- snapshot -----------------------------------------------------------


def _docs_tsv(idx: InvertedIndex) -> str:
    rows = ["doc_id\tlength"] + [f"{d}\t{n}" for d, n in zip(idx.doc_ids, idx.lengths.tolist())]
    return "\n".join(rows) + "\n"


def _lexicon_tsv(idx: InvertedIndex) -> str:
    rows = ["term\tcf\tdf"] + [f"{s.term}\t{s.cf}\t{s.df}" for s in idx.lexicon.values()]
    return "\n".join(rows) + "\n"


def encode_varints(values: np.ndarray) -> bytes:
    v = np.asarray(values, dtype=np.uint64)
    if not len(v):
        return b""
    nbytes = np.ones(len(v), dtype=np.int64)
    rest = v >> np.uint64(7)
    while rest.any():
        nbytes += rest > 0
        rest >>= np.uint64(7)
    start = np.cumsum(nbytes) - nbytes
    out = np.zeros(int(nbytes.sum()), dtype=np.uint8)
    for j in range(int(nbytes.max())):
        sel = nbytes > j
        group = (v[sel] >> np.uint64(7 * j)) & np.uint64(0x7F)
        cont = np.where(nbytes[sel] - 1 > j, 0x80, 0).astype(np.uint64)
        out[start[sel] + j] = (group | cont).astype(np.uint8)
    return out.tobytes()


def decode_varints(data: bytes) -> np.ndarray:
    b = np.frombuffer(data, dtype=np.uint8)
    if not len(b):
        return np.empty(0, dtype=np.uint64)
    ends = np.flatnonzero((b & 0x80) == 0)
    if not len(ends) or ends[-1] != len(b) - 1:
        raise DataError("truncated varint stream")
    starts = np.concatenate(([0], ends[:-1] + 1))
    group = np.repeat(np.arange(len(ends)), ends - starts + 1)
    shift = (np.arange(len(b)) - starts[group]).astype(np.uint64) * np.uint64(7)
    parts = (b & 0x7F).astype(np.uint64) << shift
    return np.bitwise_or.reduceat(parts, starts)


def _encode_postings(idx: InvertedIndex) -> bytes:
    chunks = []
    for term in idx.lexicon:
        docs, tfs = idx.postings[term]
        gaps = np.diff(docs.astype(np.int64), prepend=0)
        pairs = np.empty(2 * len(docs), dtype=np.int64)
        pairs[0::2] = gaps
        pairs[1::2] = tfs
        chunks.append(pairs)
    flat = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
    return encode_varints(flat)


def save_snapshot(idx: InvertedIndex, directory: str | Path) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "docs.tsv").write_text(_docs_tsv(idx), encoding="utf-8")
    (d / "lexicon.tsv").write_text(_lexicon_tsv(idx), encoding="utf-8")
    (d / "postings.bin").write_bytes(_MAGIC + _encode_postings(idx))
    meta = {
        "format": 1,
        **idx.stats(),
        "preprocess_fingerprint": idx.preprocess_fingerprint,
        "index_fingerprint": idx.fingerprint(),
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [d / n for n in ("docs.tsv", "lexicon.tsv", "postings.bin", "meta.json")]


def _read_tsv(path: Path, header: str) -> list[list[str]]:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != header:
        raise DataError(f"{path}: expected header {header!r}")
    return [ln.split("\t") for ln in lines[1:]]


def load_snapshot(directory: str | Path) -> InvertedIndex:
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"index snapshot {d} does not exist")
    docs = _read_tsv(d / "docs.tsv", "doc_id\tlength")
    lex = _read_tsv(d / "lexicon.tsv", "term\tcf\tdf")
    raw = (d / "postings.bin").read_bytes()
    if not raw.startswith(_MAGIC):
        raise DataError(f"{d / 'postings.bin'}: bad magic")
    values = decode_varints(raw[len(_MAGIC):]).astype(np.int64)
    expected = 2 * sum(int(row[2]) for row in lex)
    if len(values) != expected:
        raise DataError(f"{d / 'postings.bin'}: expected {expected} varints, found {len(values)}")
    postings = {}
    pos = 0
    for term, _cf, df in lex:
        n = int(df)
        pairs = values[pos:pos + 2 * n]
        pos += 2 * n
        postings[term] = (np.cumsum(pairs[0::2]).astype(np.int32), pairs[1::2].astype(np.int32))
    meta_path = d / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    idx = InvertedIndex([r[0] for r in docs], [int(r[1]) for r in docs], postings, meta.get("preprocess_fingerprint"))
    for term, cf, df in lex:
        st = idx.lexicon[term]
        if st.cf != int(cf) or st.df != int(df):
            raise DataError(f"{d / 'lexicon.tsv'}: statistics for {term!r} disagree with postings")
    return idx
