"""Seeded English-like toy corpus and query log for demos and tests.

    python -m retbias.synthetic OUT_DIR [--docs 1000] [--seed 0]

writes ``corpus.jsonl``, ``queries.log`` and a ready-to-run ``config.json``.
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path

ADJECTIVES = ("red", "quick", "ancient", "green", "silent", "bright", "heavy", "small", "modern", "rural",
              "famous", "broken", "golden", "cold", "digital", "wild", "public", "hidden", "narrow", "strong")
NOUNS = ("car", "river", "engine", "castle", "forest", "market", "storm", "library", "garden", "bridge",
         "village", "machine", "harbor", "mountain", "school", "railway", "museum", "island", "factory",
         "festival", "council", "painter", "station", "valley", "tower", "network", "farmer", "ship",
         "kingdom", "church", "desert", "battle", "election", "hospital", "theater", "league", "music",
         "vote", "bank", "energy")
VERBS = ("crossed", "built", "opened", "destroyed", "visited", "painted", "repaired", "followed",
         "described", "crowned", "flooded", "sold", "won", "moved", "founded")
PREPS = ("of", "in", "near", "across", "from", "with", "under", "for")
TEMPLATES = (
    "the {a} {n} {v} the {n2} {p} the {n3}",
    "a {a} {n} {p} the {a2} {n2}",
    "{n} {n2} {v} {p} {n3}",
    "the {n} was {v} by the {a} {n2}",
    "many {a} {n}s {v} the {n2} {n3}",
    "{a} {n} and {a2} {n2} {p} {n3}",
)


def _zipf_choice(rng: random.Random, words, s: float = 1.1):
    weights = [1 / (i + 1) ** s for i in range(len(words))]
    return rng.choices(words, weights)[0]


def sentence(rng: random.Random) -> str:
    t = rng.choice(TEMPLATES)
    return t.format(a=_zipf_choice(rng, ADJECTIVES), a2=_zipf_choice(rng, ADJECTIVES),
                    n=_zipf_choice(rng, NOUNS), n2=_zipf_choice(rng, NOUNS), n3=_zipf_choice(rng, NOUNS),
                    v=rng.choice(VERBS), p=rng.choice(PREPS)).capitalize() + "."


def make_corpus(n_docs: int = 1000, seed: int = 0) -> list[dict]:
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        # a skewed length distribution drives the bias we want to see
        n_sent = max(1, min(40, int(rng.lognormvariate(1.3, 0.8))))
        docs.append({"id": f"doc{i:05d}", "text": " ".join(sentence(rng) for _ in range(n_sent))})
    return docs


def make_query_log(n_lines: int = 300, seed: int = 0) -> list[str]:
    """Mostly in-vocabulary queries with URLs, OOV words and duplicates mixed in."""
    rng = random.Random(seed + 1)
    lines = []
    for _ in range(n_lines):
        r = rng.random()
        if r < 0.1:
            lines.append(f"www.{rng.choice(NOUNS)}.com")
        elif r < 0.2:
            lines.append(f"{rng.choice(NOUNS)} zzyzx{rng.randrange(100)}")
        elif r < 0.3 and lines:
            lines.append(rng.choice(lines))
        else:
            k = rng.randint(1, 3)
            words = [_zipf_choice(rng, ADJECTIVES)] * (k > 2) + [_zipf_choice(rng, NOUNS) for _ in range(k - (k > 2))]
            lines.append(" ".join(words))
    return lines


def default_config(sq2_cap: int = 200, clusters: int = 10) -> dict:
    return {
        "name": "synthetic",
        "corpus": {"path": "corpus.jsonl", "format": "jsonl"},
        "bm25": {"k1": 1.2, "b": 0.75},
        "cutoff": 100,
        "utility": {"kind": "cumulative"},
        "query_sets": [
            {"name": "sq1", "method": "sq1"},
            {"name": "sq2", "method": "sq2", "config": {"max_combinations_per_doc": sq2_cap}},
            {"name": "sq3", "method": "sq3", "config": {"num_clusters": clusters, "terms_per_cluster": 50}},
            {"name": "rsq", "method": "rsq", "config": {"total_budget": 5000}},
            {"name": "log", "method": "log", "config": {"path": "queries.log"}},
        ],
        "output_dir": "out",
        "seed": 0,
        "workers": 1,
    }


def write_bundle(out_dir: str | Path, n_docs: int = 1000, seed: int = 0) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for d in make_corpus(n_docs, seed):
            fh.write(json.dumps(d) + "\n")
    (out / "queries.log").write_text("\n".join(make_query_log(seed=seed)) + "\n", encoding="utf-8")
    cfg = out / "config.json"
    cfg.write_text(json.dumps(default_config(), indent=2) + "\n")
    return cfg


def main(argv=None):
    ap = argparse.ArgumentParser(prog="python -m retbias.synthetic", description="write a synthetic corpus bundle")
    ap.add_argument("out_dir")
    ap.add_argument("--docs", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    print(write_bundle(args.out_dir, args.docs, args.seed))


if __name__ == "__main__":
    main()
