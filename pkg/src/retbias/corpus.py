"""Corpus ingestion and term preprocessing (tokenize, stop, stem)."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DataError
from .stemmer import porter_stem

TOKEN_RULE = "alnum-runs-lower"
_TOKEN = re.compile(r"[^\W_]+")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword list, one word per line; defaults to the embedded SMART list."""
    if path is None:
        text = resources.files("retbias").joinpath("data/smart_stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    text: str


@dataclass(frozen=True)
class Document:
    doc_id: str
    terms: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class PreprocessConfig:
    stopwords: frozenset[str] = field(default_factory=load_stopwords)
    stemming: bool = True
    token_rule: str = TOKEN_RULE

    def __post_init__(self):
        if any(w != w.lower() for w in self.stopwords):
            raise ValueError("stopword entries must be lowercase")

    @classmethod
    def from_dict(cls, d: dict | None) -> "PreprocessConfig":
        d = d or {}
        return cls(stopwords=load_stopwords(d.get("stopwords_path")), stemming=bool(d.get("stemming", True)))

    def fingerprint(self) -> str:
        payload = json.dumps(
            {"stopwords": sorted(self.stopwords), "stemming": self.stemming, "token_rule": self.token_rule},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def analyze(self, text: str) -> list[str]:
        """Tokenize, drop stopwords, then stem."""
        toks = [t for t in tokenize(text) if t not in self.stopwords]
        if self.stemming:
            return [porter_stem(t) for t in toks]
        return toks


def tokenize(text: str) -> list[str]:
    return [m.group().lower() for m in _TOKEN.finditer(text)]


def preprocess(raw: RawDocument, cfg: PreprocessConfig) -> Document:
    return Document(raw.doc_id, tuple(cfg.analyze(raw.text)))


def preprocess_corpus(raws: Iterable[RawDocument], cfg: PreprocessConfig) -> Iterator[Document]:
    """Preprocess a stream of documents, rejecting repeated ids."""
    seen: set[str] = set()
    for raw in raws:
        if raw.doc_id in seen:
            raise DataError(f"duplicate doc_id {raw.doc_id!r}")
        seen.add(raw.doc_id)
        yield preprocess(raw, cfg)


def ingest(path: str | Path, fmt: str = "jsonl") -> Iterator[RawDocument]:
    """Stream raw documents from a ``jsonl`` or ``trec_text`` file, in file order."""
    path = Path(path)
    if fmt == "jsonl":
        return _ingest_jsonl(path)
    if fmt == "trec_text":
        return _ingest_trec(path)
    raise ValueError(f"unknown corpus format {fmt!r}")


def _ingest_jsonl(path: Path) -> Iterator[RawDocument]:
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: malformed JSON ({e.msg})") from None
            if not isinstance(rec, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            doc_id = rec.get("id")
            if doc_id is None or str(doc_id) == "":
                raise DataError(f"{path}:{lineno}: missing \"id\"")
            text = rec.get("text", "")
            if not isinstance(text, str):
                raise DataError(f"{path}:{lineno}: \"text\" must be a string")
            yield RawDocument(str(doc_id), text)


_DOC = re.compile(r"<DOC>(.*?)</DOC>", re.S)
_DOCNO = re.compile(r"<DOCNO>(.*?)</DOCNO>", re.S)
_TEXT = re.compile(r"<TEXT>(.*?)</TEXT>", re.S)


def _ingest_trec(path: Path) -> Iterator[RawDocument]:
    data = path.read_text(encoding="utf-8")
    pos = 0
    for m in _DOC.finditer(data):
        stray = data[pos:m.start()]
        if "<DOC>" in stray or stray.strip():
            raise DataError(f"{path}: offset {pos}: content outside a <DOC> block")
        pos = m.end()
        body = m.group(1)
        docno = _DOCNO.search(body)
        if docno is None or not docno.group(1).strip():
            raise DataError(f"{path}: offset {m.start()}: <DOC> without <DOCNO>")
        text = "\n".join(t.group(1) for t in _TEXT.finditer(body))
        yield RawDocument(docno.group(1).strip(), text)
    rest = data[pos:]
    if rest.strip():
        raise DataError(f"{path}: offset {pos}: unterminated or stray content after last </DOC>")
