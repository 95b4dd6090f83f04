"""Query-set construction: frequency-based (SQ1), in-document combinations
(SQ2), cluster-discriminative terms (SQ3) and real query-log filtering.

QuerySet file format (TSV)::

    # provenance=SQ1 config_fingerprint=<hex> preprocess_fingerprint=<hex>
    qid<TAB>mode<TAB>weight<TAB>terms
    q1<TAB>d<TAB>1.0<TAB>solar energi

``mode`` is ``d`` (disjunctive) or ``c`` (conjunctive); ``terms`` is space-joined.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations, islice
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import PreprocessConfig
from .errors import DataError
from .index import CONJUNCTIVE, DISJUNCTIVE, InvertedIndex

log = logging.getLogger(__name__)

PROVENANCES = ("SQ1", "SQ2", "SQ3", "RSQ", "LOG")
MAX_QUERY_TERMS = 4
_MODE_CODE = {DISJUNCTIVE: "d", CONJUNCTIVE: "c"}
_CODE_MODE = {v: k for k, v in _MODE_CODE.items()}


@dataclass(frozen=True)
class Query:
    terms: tuple[str, ...]
    weight: float = 1.0
    mode: str = DISJUNCTIVE

    def __post_init__(self):
        if not 1 <= len(self.terms) <= MAX_QUERY_TERMS:
            raise ValueError(f"query must have 1..{MAX_QUERY_TERMS} terms, got {self.terms!r}")
        if self.weight < 0:
            raise ValueError("query weight must be non-negative")
        if self.mode not in _MODE_CODE:
            raise ValueError(f"unknown query mode {self.mode!r}")


@dataclass
class QuerySet:
    queries: list[Query]
    provenance: str
    config_fingerprint: str
    preprocess_fingerprint: str | None = None

    def __len__(self):
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)

    def shards(self, k: int) -> list["QuerySet"]:
        """Split into ``k`` contiguous shards with the same metadata."""
        bounds = np.linspace(0, len(self.queries), k + 1).astype(int)
        return [
            QuerySet(self.queries[lo:hi], self.provenance, self.config_fingerprint, self.preprocess_fingerprint)
            for lo, hi in zip(bounds[:-1], bounds[1:])
        ]

    def to_tsv(self) -> str:
        lines = [
            f"# provenance={self.provenance} config_fingerprint={self.config_fingerprint} "
            f"preprocess_fingerprint={self.preprocess_fingerprint or '-'}",
            "qid\tmode\tweight\tterms",
        ]
        for i, q in enumerate(self.queries, 1):
            lines.append(f"q{i}\t{_MODE_CODE[q.mode]}\t{q.weight!r}\t{' '.join(q.terms)}")
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_tsv(), encoding="utf-8")
        return path

    @classmethod
    def read(cls, path: str | Path) -> "QuerySet":
        path = Path(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        if len(lines) < 2 or not lines[0].startswith("#") or lines[1] != "qid\tmode\tweight\tterms":
            raise DataError(f"{path}: not a query-set file")
        meta = dict(kv.split("=", 1) for kv in lines[0][1:].split())
        queries = []
        for lineno, line in enumerate(lines[2:], 3):
            parts = line.split("\t")
            if len(parts) != 4 or parts[1] not in _CODE_MODE:
                raise DataError(f"{path}:{lineno}: malformed query row")
            try:
                queries.append(Query(tuple(parts[3].split()), float(parts[2]), _CODE_MODE[parts[1]]))
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: {e}") from None
        pp = meta.get("preprocess_fingerprint")
        return cls(queries, meta.get("provenance", "?"), meta.get("config_fingerprint", "-"),
                   None if pp in (None, "-") else pp)


def _plain(cfg) -> dict | None:
    if cfg is None:
        return None
    return {k: (v.fingerprint() if isinstance(v, PreprocessConfig) else v)
            for k, v in ((f, getattr(cfg, f)) for f in cfg.__dataclass_fields__)}


def config_fingerprint(method: str, cfg, preprocess: PreprocessConfig | None) -> str:
    payload = {"method": method, "config": _plain(cfg),
               "preprocess": preprocess.fingerprint() if preprocess else None}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


# --- SQ1 ------------------------------------------------------------------


@dataclass(frozen=True)
class Sq1Config:
    min_unigram_cf: int = 6
    min_bigram_cf: int = 20
    max_bigrams: int = 2_000_000

    def __post_init__(self):
        if min(self.min_unigram_cf, self.min_bigram_cf, self.max_bigrams) < 1:
            raise ValueError("Sq1Config values must be positive")


def count_bigrams(docs: Iterable) -> Counter:
    counts: Counter = Counter()
    for doc in docs:
        t = doc.terms
        counts.update(zip(t, t[1:]))
    return counts


def generate_sq1(docs: Iterable, idx: InvertedIndex, cfg: Sq1Config = Sq1Config(),
                 preprocess: PreprocessConfig | None = None) -> QuerySet:
    """Frequent unigrams (code-point order) followed by the most frequent adjacent bigrams."""
    unigrams = [Query((s.term,)) for s in idx.lexicon.values() if s.cf >= cfg.min_unigram_cf]
    bigrams = [(pair, n) for pair, n in count_bigrams(docs).items() if n >= cfg.min_bigram_cf]
    bigrams.sort(key=lambda item: (-item[1], item[0]))
    queries = unigrams + [Query(pair) for pair, _ in bigrams[:cfg.max_bigrams]]
    return QuerySet(queries, "SQ1", config_fingerprint("sq1", cfg, preprocess),
                    preprocess.fingerprint() if preprocess else idx.preprocess_fingerprint)


# --- SQ2 ------------------------------------------------------------------


@dataclass(frozen=True)
class Sq2Config:
    min_within_doc_tf: int = 2
    max_terms: int = 4
    df_ceiling_fraction: float = 0.25
    max_combinations_per_doc: int = 50_000

    def __post_init__(self):
        if not 1 <= self.max_terms <= MAX_QUERY_TERMS:
            raise ValueError("max_terms must be in 1..4")
        if not 0 < self.df_ceiling_fraction <= 1:
            raise ValueError("df_ceiling_fraction must be in (0, 1]")
        if self.max_combinations_per_doc < 1 or self.min_within_doc_tf < 1:
            raise ValueError("Sq2Config counts must be positive")


def _doc_combinations(eligible: Sequence[str], max_terms: int):
    for size in range(1, max_terms + 1):
        yield from combinations(eligible, size)


def generate_sq2(docs: Iterable, idx: InvertedIndex, cfg: Sq2Config = Sq2Config(),
                 preprocess: PreprocessConfig | None = None) -> QuerySet:
    """Conjunctive combinations of terms repeated within a document, df-ceiling filtered.

    Output is sorted by query length, then lexicographically.
    """
    ceiling = cfg.df_ceiling_fraction * idx.N
    seen: set[tuple[str, ...]] = set()
    capped = []
    for doc in docs:
        tf = Counter(doc.terms)
        eligible = sorted(
            t for t, n in tf.items()
            if n >= cfg.min_within_doc_tf and t in idx.lexicon and idx.lexicon[t].df <= ceiling
        )
        combos = _doc_combinations(eligible, cfg.max_terms)
        batch = list(islice(combos, cfg.max_combinations_per_doc))
        if next(combos, None) is not None:
            capped.append(doc.doc_id)
        seen.update(batch)
    if capped:
        shown = ", ".join(capped[:5]) + (" ..." if len(capped) > 5 else "")
        log.warning("SQ2: %d documents exceed %d combinations, excess skipped (%s)",
                    len(capped), cfg.max_combinations_per_doc, shown)
    queries = [Query(q, mode=CONJUNCTIVE) for q in sorted(seen, key=lambda q: (len(q), q))]
    return QuerySet(queries, "SQ2", config_fingerprint("sq2", cfg, preprocess),
                    preprocess.fingerprint() if preprocess else idx.preprocess_fingerprint)


# --- SQ3 ------------------------------------------------------------------


@dataclass(frozen=True)
class Sq3Config:
    num_clusters: int | None = None  # None: ceil(N / 1000)
    terms_per_cluster: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.num_clusters is not None and self.num_clusters < 1:
            raise ValueError("num_clusters must be >= 1")
        if self.terms_per_cluster < 1:
            raise ValueError("terms_per_cluster must be >= 1")


def discrimination_scores(cluster_cf: dict[str, int], corpus_cf: dict[str, int]) -> dict[str, float]:
    """Per-term contribution ``p_s * ln(p_s / p_c)`` to the cluster-vs-corpus relative entropy."""
    s_total = sum(cluster_cf.values())
    c_total = sum(corpus_cf.values())
    out = {}
    for t, n in cluster_cf.items():
        if n <= 0:
            continue
        ps = n / s_total
        pc = corpus_cf[t] / c_total
        out[t] = ps * math.log(ps / pc)
    return out


def rank_discriminative_terms(scores: dict[str, float], k: int) -> list[str]:
    return [t for t, _ in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]]


def cluster_documents(docs: Sequence, idx: InvertedIndex, k: int, seed: int) -> np.ndarray:
    """k-means labels over L2-normalised tf-idf vectors, one per document in ``docs``."""
    from scipy.sparse import csr_matrix
    from sklearn.cluster import KMeans
    from sklearn.feature_extraction.text import TfidfTransformer

    if k == 1 or len(docs) <= 1:
        return np.zeros(len(docs), dtype=np.int64)
    col = {t: j for j, t in enumerate(idx.lexicon)}
    rows, cols, vals = [], [], []
    for i, doc in enumerate(docs):
        for t, n in Counter(doc.terms).items():
            rows.append(i)
            cols.append(col[t])
            vals.append(n)
    counts = csr_matrix((vals, (rows, cols)), shape=(len(docs), len(col)), dtype=np.float64)
    X = TfidfTransformer().fit_transform(counts)
    km = KMeans(n_clusters=k, n_init=4, random_state=seed)
    return km.fit_predict(X)


def generate_sq3(docs: Iterable, idx: InvertedIndex, cfg: Sq3Config = Sq3Config(),
                 preprocess: PreprocessConfig | None = None) -> QuerySet:
    """Single terms and consecutive ranked pairs of cluster-discriminative terms."""
    docs = list(docs)
    k = cfg.num_clusters or max(1, math.ceil(idx.N / 1000))
    if k > max(len(docs), 1):
        raise ValueError(f"num_clusters={k} exceeds the number of documents ({len(docs)})")
    labels = cluster_documents(docs, idx, k, cfg.seed)
    corpus_cf = {t: s.cf for t, s in idx.lexicon.items()}
    queries: list[Query] = []
    seen: set[tuple[str, ...]] = set()

    def emit(terms):
        if terms not in seen:
            seen.add(terms)
            queries.append(Query(terms))

    for cluster in range(k):
        cluster_cf: Counter = Counter()
        for doc, lab in zip(docs, labels):
            if lab == cluster:
                cluster_cf.update(doc.terms)
        if not cluster_cf:
            log.warning("SQ3: cluster %d is empty; skipped", cluster)
            continue
        ranked = rank_discriminative_terms(discrimination_scores(cluster_cf, corpus_cf), cfg.terms_per_cluster)
        for t in ranked:
            emit((t,))
        for a, b in zip(ranked, ranked[1:]):
            emit((a, b))
    return QuerySet(queries, "SQ3", config_fingerprint("sq3", cfg, preprocess),
                    preprocess.fingerprint() if preprocess else idx.preprocess_fingerprint)


# --- query log ------------------------------------------------------------


@dataclass
class LogFilterStats:
    lines: int = 0
    unparseable: int = 0
    duplicates: int = 0
    with_period: int = 0
    empty: int = 0
    too_long: int = 0
    out_of_vocabulary: int = 0
    kept: int = 0


@dataclass(frozen=True)
class LogConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    max_terms: int = MAX_QUERY_TERMS


def read_query_log(path: str | Path, fmt: str = "lines"):
    """Yield raw query strings; ``aol`` takes the ``Query`` column of the AOL TSV.

    Lines that are not valid UTF-8 (or AOL rows without a query column) are
    yielded as ``None`` so the filter can count them.
    """
    with open(path, "rb") as fh:
        for i, raw in enumerate(fh):
            try:
                line = raw.decode("utf-8").rstrip("\r\n")
            except UnicodeDecodeError:
                yield None
                continue
            if fmt == "aol":
                if i == 0 and line.startswith("AnonID"):
                    continue
                parts = line.split("\t")
                yield parts[1] if len(parts) >= 2 else None
            else:
                yield line


def filter_query_log(log_lines: Iterable[str | None], idx: InvertedIndex, cfg: LogConfig = LogConfig(),
                     stats: LogFilterStats | None = None) -> QuerySet:
    """Keep unique, period-free queries whose preprocessed terms are all indexed."""
    stats = stats if stats is not None else LogFilterStats()
    seen_raw: set[str] = set()
    seen_terms: set[tuple[str, ...]] = set()
    queries = []
    for raw in log_lines:
        stats.lines += 1
        if raw is None:
            stats.unparseable += 1
            continue
        if raw in seen_raw:
            stats.duplicates += 1
            continue
        seen_raw.add(raw)
        if "." in raw:
            stats.with_period += 1
            continue
        terms = tuple(cfg.preprocess.analyze(raw))
        if not terms:
            stats.empty += 1
            continue
        if len(terms) > cfg.max_terms:
            stats.too_long += 1
            continue
        if any(t not in idx.lexicon for t in terms):
            stats.out_of_vocabulary += 1
            continue
        if terms in seen_terms:
            stats.duplicates += 1
            continue
        seen_terms.add(terms)
        queries.append(Query(terms))
    stats.kept = len(queries)
    log.info("query log: %s", stats)
    return QuerySet(queries, "LOG", config_fingerprint("log", cfg, cfg.preprocess), cfg.preprocess.fingerprint())
