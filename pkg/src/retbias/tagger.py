"""Deterministic coarse part-of-speech tagging.

Words are looked up in an embedded lexicon (Brill's tagger lexicon collapsed
onto six coarse tags); unknown words fall back to suffix rules.
"""

from __future__ import annotations

import csv
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

from .errors import DataError

TAGS = ("noun", "adj", "verb", "adp", "adv", "other")

ADPOSITIONS = frozenset(
    """aboard about above across after against along amid among amongst around as at
    before behind below beneath beside besides between beyond by despite down during
    except for from in inside into near of off on onto opposite out outside over past
    per since through throughout till toward towards under underneath unlike until unto
    upon via with within without""".split()
)

# external tagsets accepted in pretagged input, mapped onto TAGS
_FOREIGN = {
    "propn": "noun", "aux": "verb", "det": "other", "pron": "other", "num": "other",
    "conj": "other", "cconj": "other", "sconj": "other", "prt": "other", "part": "other",
    "intj": "other", "punct": "other", "sym": "other", "x": "other", ".": "other",
}


class TaggedToken(NamedTuple):
    token: str
    tag: str


@lru_cache(maxsize=1)
def lexicon() -> dict[str, str]:
    text = resources.files("retbias").joinpath("data/coarse_lexicon.tsv").read_text("utf-8")
    return dict(line.split("\t") for line in text.splitlines() if line)


def suffix_tag(word: str) -> str:
    if word in ADPOSITIONS:
        return "adp"
    if word.endswith("ly"):
        return "adv"
    if word.endswith(("ous", "ful", "ive", "al")):
        return "adj"
    if word.endswith(("ize", "ate", "ify")):
        return "verb"
    return "noun"


def tag_word(word: str) -> str:
    return lexicon().get(word) or suffix_tag(word)


def pos_tag(tokens: Sequence[str]) -> list[TaggedToken]:
    lex = lexicon()
    return [TaggedToken(t, lex.get(t) or suffix_tag(t)) for t in tokens]


def normalize_tag(tag: str) -> str:
    t = tag.strip().lower()
    if t in TAGS:
        return t
    if t in _FOREIGN:
        return _FOREIGN[t]
    raise DataError(f"unknown part-of-speech tag {tag!r}")


def read_pretagged(path: str | Path) -> Iterator[tuple[str, list[TaggedToken]]]:
    """Read ``doc_id<TAB>token<TAB>tag`` rows; rows of one document must be contiguous."""
    current: str | None = None
    tokens: list[TaggedToken] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected doc_id, token, tag")
            doc_id, token, tag = row
            if doc_id != current:
                if current is not None:
                    yield current, tokens
                if doc_id in seen:
                    raise DataError(f"{path}:{lineno}: rows for {doc_id!r} are not contiguous")
                seen.add(doc_id)
                current, tokens = doc_id, []
            tokens.append(TaggedToken(token.lower(), normalize_tag(tag)))
    if current is not None:
        yield current, tokens
