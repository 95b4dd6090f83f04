import json
from pathlib import Path

import pytest

from retbias.corpus import Document, PreprocessConfig
from retbias.index import build_index

DATA = Path(__file__).parent / "data"


def docs_from(mapping: dict) -> list[Document]:
    """{"d1": "a a b"} or {"d1": ["a", "a", "b"]} -> Documents in the given order."""
    return [Document(k, tuple(v.split() if isinstance(v, str) else v)) for k, v in mapping.items()]


def index_of(mapping: dict, fingerprint=None):
    docs = docs_from(mapping)
    return docs, build_index(docs, fingerprint)


@pytest.fixture
def raw_cfg():
    """No stopwords, no stemming: terms are just lowercase tokens."""
    return PreprocessConfig(stopwords=frozenset(), stemming=False)


@pytest.fixture
def toy_bundle(tmp_path):
    """Three-document jsonl corpus, a small query log and a config covering every method."""
    corpus = tmp_path / "corpus.jsonl"
    texts = {
        "a": "Solar energy powers the red car. Solar panels and solar energy.",
        "b": "The tax of income rises. Income tax law and the red car.",
        "c": "Wind energy and solar power. The quick river crosses the valley.",
    }
    corpus.write_text("".join(json.dumps({"id": k, "text": v}) + "\n" for k, v in texts.items()))
    (tmp_path / "queries.log").write_text("solar energy\nwww.example.com\nsolar zzzgarble\nincome tax\n")
    cfg = {
        "name": "toy",
        "corpus": {"path": "corpus.jsonl"},
        "cutoff": 2,
        "query_sets": [
            {"name": "sq1", "method": "sq1", "config": {"min_unigram_cf": 2, "min_bigram_cf": 2}},
            {"name": "sq2", "method": "sq2", "config": {"df_ceiling_fraction": 1.0}},
            {"name": "sq3", "method": "sq3", "config": {"num_clusters": 2, "terms_per_cluster": 5}},
            {"name": "rsq", "method": "rsq", "config": {"total_budget": 50}},
            {"name": "log", "method": "log", "config": {"path": "queries.log"}},
        ],
        "output_dir": "out",
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


# --- acceptance summary ---------------------------------------------------

_CRITERIA: dict[str, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the terminal summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = _CRITERIA.setdefault(item.nodeid, [marker.args[0], None, 0.0, ""])
    if rep.when == "call" or rep.failed:
        entry[1] = rep.passed if entry[1] is None else entry[1] and rep.passed
        entry[2] += rep.duration
        notes = [body for name, body in rep.user_properties if name == "note"]
        entry[3] = "; ".join(notes)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, seconds, note in _CRITERIA.values():
        status = "PASS" if ok else "FAIL"
        line = f"{status}  {name}  [{seconds:.2f}s]"
        terminalreporter.write_line(line + (f"  {note}" if note else ""))
