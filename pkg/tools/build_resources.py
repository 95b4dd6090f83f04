"""Regenerate the embedded stopword list and tagging lexicon.

Usage::

    pip download --no-deps python-rake textblob -d /tmp/wheels
    python tools/build_resources.py /tmp/wheels

The SMART stopword list is read from python-rake's ``SmartStopList.py``; the
tagging lexicon is the Brill lexicon bundled with textblob, collapsed onto the
coarse tagset used by :mod:`retbias.tagger`.
"""

import ast
import re
import sys
import zipfile
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "src" / "retbias" / "data"

PENN_TO_COARSE = {
    **dict.fromkeys(["NN", "NNS", "NNP", "NNPS", "NP"], "noun"),
    **dict.fromkeys(["JJ", "JJR", "JJS"], "adj"),
    **dict.fromkeys(["VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "MD"], "verb"),
    "IN": "adp",
    **dict.fromkeys(["RB", "RBR", "RBS", "WRB"], "adv"),
}

WORD = re.compile(r"^[a-z0-9]+$")


def _wheel(folder: Path, prefix: str) -> zipfile.ZipFile:
    (path,) = sorted(folder.glob(prefix + "-*.whl"))
    return zipfile.ZipFile(path)


def build_stopwords(folder: Path) -> None:
    src = _wheel(folder, "python_rake").read("RAKE/stoplists/SmartStopList.py").decode()
    tree = ast.parse(src)
    words = next(
        ast.literal_eval(node.value)
        for node in tree.body
        if isinstance(node, ast.Assign) and node.targets[0].id == "wordlist"
    )
    unique = list(dict.fromkeys(w.strip().lower() for w in words))
    (DATA / "smart_stopwords.txt").write_text("\n".join(unique) + "\n", encoding="utf-8")
    print(f"stopwords: {len(words)} lines, {len(unique)} unique")


def build_lexicon(folder: Path) -> None:
    text = _wheel(folder, "textblob").read("textblob/en/en-lexicon.txt").decode("utf-8")
    exact: dict[str, str] = {}
    folded: dict[str, str] = {}
    for line in text.splitlines():
        if not line or line.startswith(";;;"):
            continue
        word, tags = line.split()[:2]
        tag = PENN_TO_COARSE.get(tags.split("|")[0], "other")
        low = word.lower()
        if not WORD.match(low):
            continue
        if word == low:
            exact.setdefault(low, tag)
        else:
            folded.setdefault(low, tag)
    merged = {**folded, **exact}
    rows = [f"{w}\t{merged[w]}" for w in sorted(merged)]
    (DATA / "coarse_lexicon.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"lexicon: {len(rows)} entries")


if __name__ == "__main__":
    wheels = Path(sys.argv[1])
    build_stopwords(wheels)
    build_lexicon(wheels)
