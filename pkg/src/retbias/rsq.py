"""Rule-based query simulation: POS-pattern-filtered N-grams ranked by frequency."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .corpus import PreprocessConfig, RawDocument, tokenize
from .querygen import MAX_QUERY_TERMS, Query, QuerySet, config_fingerprint
from .tagger import TAGS, TaggedToken, pos_tag, read_pretagged

log = logging.getLogger(__name__)

DEFAULT_PATTERNS: dict[int, tuple[str, ...]] = {
    1: ("noun",),
    2: ("adj noun", "noun noun"),
    3: ("adj adj noun", "adj noun noun", "noun adj noun", "noun noun noun", "noun adp noun"),
    4: (
        "noun verb adp noun", "adj noun adj noun", "noun adp adj noun", "noun noun adp noun",
        "noun verb noun noun", "adv adj noun noun", "adj noun verb noun", "noun adj noun noun",
    ),
}

DEFAULT_SHARES = {1: 0.3, 2: 0.4, 3: 0.2, 4: 0.1}


@dataclass(frozen=True)
class PatternTable:
    patterns: Mapping[int, frozenset[tuple[str, ...]]]

    @classmethod
    def from_rows(cls, rows: Mapping) -> "PatternTable":
        table: dict[int, frozenset] = {}
        for n, seqs in rows.items():
            n = int(n)
            if not 1 <= n <= MAX_QUERY_TERMS:
                raise ValueError(f"pattern length {n} outside 1..{MAX_QUERY_TERMS}")
            parsed = set()
            for seq in seqs:
                tags = tuple(seq.split()) if isinstance(seq, str) else tuple(seq)
                if len(tags) != n or any(t not in TAGS for t in tags):
                    raise ValueError(f"bad {n}-gram pattern {seq!r}")
                parsed.add(tags)
            table[n] = frozenset(parsed)
        return cls(table)

    @classmethod
    def default(cls) -> "PatternTable":
        return cls.from_rows(DEFAULT_PATTERNS)

    @classmethod
    def from_json(cls, path: str | Path) -> "PatternTable":
        return cls.from_rows(json.loads(Path(path).read_text(encoding="utf-8")))

    @property
    def max_n(self) -> int:
        return max((n for n, p in self.patterns.items() if p), default=0)


@dataclass(frozen=True)
class RsqConfig:
    quotas: Mapping[int, int] | None = None
    total_budget: int | None = 100_000
    tagger: str = "builtin"
    pretagged_path: str | None = None
    patterns_path: str | None = None
    patterns: Mapping | None = None  # inline rows, same shape as the JSON file

    def __post_init__(self):
        if self.tagger not in ("builtin", "pretagged-input"):
            raise ValueError(f"unknown tagger {self.tagger!r}")
        if self.tagger == "pretagged-input" and not self.pretagged_path:
            raise ValueError("pretagged-input tagger needs pretagged_path")
        if self.quotas is None and self.total_budget is None:
            raise ValueError("need quotas or total_budget")
        if self.quotas is not None:
            object.__setattr__(self, "quotas", {int(n): int(q) for n, q in self.quotas.items()})
            if any(q < 0 for q in self.quotas.values()):
                raise ValueError("quotas must be non-negative")
        if self.total_budget is not None and self.total_budget < 0:
            raise ValueError("total_budget must be non-negative")

    def effective_quotas(self) -> dict[int, int]:
        if self.quotas is not None:
            return {n: self.quotas.get(n, 0) for n in range(1, MAX_QUERY_TERMS + 1)}
        return {n: int(share * self.total_budget) for n, share in DEFAULT_SHARES.items()}

    def table(self) -> PatternTable:
        if self.patterns is not None:
            return PatternTable.from_rows(self.patterns)
        return PatternTable.from_json(self.patterns_path) if self.patterns_path else PatternTable.default()


def match_patterns(tagged: list[TaggedToken], table: PatternTable) -> Iterator[tuple[tuple[str, ...], int]]:
    """Every contiguous window whose tag sequence is a row of ``table``."""
    tags = [t.tag for t in tagged]
    toks = [t.token for t in tagged]
    max_n = table.max_n
    for i in range(len(tagged)):
        for n in range(1, max_n + 1):
            if i + n > len(tagged):
                break
            if tuple(tags[i:i + n]) in table.patterns.get(n, ()):
                yield tuple(toks[i:i + n]), n


def count_ngrams(tagged_docs: Iterable[list[TaggedToken]], table: PatternTable) -> dict[int, Counter]:
    counts = {n: Counter() for n in range(1, MAX_QUERY_TERMS + 1)}
    for tagged in tagged_docs:
        for gram, n in match_patterns(tagged, table):
            counts[n][gram] += 1
    return counts


def rank_ngrams(counts: dict[int, Counter], quotas: Mapping[int, int],
                total_budget: int | None = None) -> list[tuple[tuple[str, ...], int]]:
    """Per length, most frequent first (ties lexicographic), cut at the quota.

    If the survivors still exceed ``total_budget``, the most frequent ones
    across all lengths are kept. Returns ``(ngram, frequency)`` ordered by
    length, then rank.
    """
    picked = []
    for n in sorted(counts):
        ranked = sorted(counts[n].items(), key=lambda kv: (-kv[1], kv[0]))
        picked.extend((gram, freq, n, r) for r, (gram, freq) in enumerate(ranked[:quotas.get(n, 0)]))
    if total_budget is not None and len(picked) > total_budget:
        keep = sorted(picked, key=lambda p: (-p[1], p[2], p[3]))[:total_budget]
        picked = sorted(keep, key=lambda p: (p[2], p[3]))
    return [(gram, freq) for gram, freq, _, _ in picked]


def rsq_from_tagged(tagged_docs: Iterable[list[TaggedToken]], cfg: RsqConfig,
                    preprocess: PreprocessConfig) -> QuerySet:
    counts = count_ngrams(tagged_docs, cfg.table())
    ranked = rank_ngrams(counts, cfg.effective_quotas(), cfg.total_budget)
    seen: set[tuple[str, ...]] = set()
    queries = []
    for gram, _ in ranked:
        terms = tuple(preprocess.analyze(" ".join(gram)))
        # pretagged tokens may split into several terms
        if terms and len(terms) <= MAX_QUERY_TERMS and terms not in seen:
            seen.add(terms)
            queries.append(Query(terms))
    log.info("RSQ: %d ranked n-grams, %d queries after preprocessing", len(ranked), len(queries))
    return QuerySet(queries, "RSQ", config_fingerprint("rsq", cfg, preprocess), preprocess.fingerprint())


def generate_rsq(docs: Iterable[RawDocument], cfg: RsqConfig, preprocess: PreprocessConfig) -> QuerySet:
    """Tag raw documents (or read the pretagged file) and build the RSQ query set."""
    if cfg.tagger == "pretagged-input":
        tagged = (toks for _, toks in read_pretagged(cfg.pretagged_path))
    else:
        tagged = (pos_tag(tokenize(d.text)) for d in docs)
    return rsq_from_tagged(tagged, cfg, preprocess)
