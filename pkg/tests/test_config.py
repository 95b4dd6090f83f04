import json

import pytest

from retbias.cli import main
from retbias.config import load_config, parse_config
from retbias.errors import ConfigError
from retbias.querygen import Sq3Config
from retbias.rsq import RsqConfig


def test_paths_resolve_against_config_dir(toy_bundle):
    cfg = load_config(toy_bundle)
    assert cfg.corpus_path == toy_bundle.parent / "corpus.jsonl"
    assert cfg.output_dir == toy_bundle.parent / "out"
    assert cfg.query_set("sq1").output == toy_bundle.parent / "out" / "queries" / "sq1.tsv"
    assert cfg.log_source(cfg.query_set("log")) == (toy_bundle.parent / "queries.log", "lines")


def test_query_set_lookup_by_name_then_method(tmp_path):
    raw = {"corpus": {"path": "c.jsonl"}, "query_sets": [{"name": "small", "method": "sq3"}], "seed": 9}
    cfg = parse_config(raw, tmp_path, check_paths=False)
    assert cfg.query_set("small").name == "small"
    assert cfg.query_set("sq3").name == "small"
    assert cfg.query_set("sq1").output == tmp_path / "out" / "queries" / "sq1.tsv"
    with pytest.raises(ConfigError):
        cfg.query_set("nothing")
    sq3 = cfg.query_set("small").build_config(cfg.seed, cfg.preprocess(), tmp_path)
    assert sq3 == Sq3Config(seed=9)


def test_rsq_paths_resolved(tmp_path):
    raw = {"corpus": {"path": "c.jsonl"},
           "query_sets": [{"method": "rsq", "config": {"patterns_path": "p.json", "quotas": {"1": 5}}}]}
    cfg = parse_config(raw, tmp_path, check_paths=False)
    rsq = cfg.query_set("rsq").build_config(0, cfg.preprocess(), tmp_path)
    assert isinstance(rsq, RsqConfig)
    assert rsq.patterns_path == str(tmp_path / "p.json")
    assert rsq.effective_quotas() == {1: 5, 2: 0, 3: 0, 4: 0}


@pytest.mark.parametrize("raw", [
    [],
    {"corpus": {}},
    {"corpus": {"path": "c", "format": "xml"}},
    {"corpus": {"path": "c"}, "workers": 0},
    {"corpus": {"path": "c"}, "utility": {"kind": "linear"}},
    {"corpus": {"path": "c"}, "preprocessing": {"lowercase": False}},
    {"corpus": {"path": "c"}, "query_sets": [{"method": "sq1"}, {"method": "sq1"}]},
])
def test_rejected(tmp_path, raw):
    with pytest.raises(ConfigError):
        parse_config(raw, tmp_path, check_paths=False)


def test_fingerprint_follows_content(tmp_path):
    a = parse_config({"corpus": {"path": "c"}, "cutoff": 10}, tmp_path, check_paths=False)
    b = parse_config({"cutoff": 10, "corpus": {"path": "c"}}, tmp_path, check_paths=False)
    c = parse_config({"corpus": {"path": "c"}, "cutoff": 11}, tmp_path, check_paths=False)
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()


def test_analysis_pairs_restrict_correlation(toy_bundle):
    cfg = json.loads(toy_bundle.read_text())
    cfg["analysis"] = {"pairs": [["sq1", "rsq"]]}
    toy_bundle.write_text(json.dumps(cfg))
    assert main(["pipeline", "--config", str(toy_bundle)]) == 0
    corr = json.loads((toy_bundle.parent / "out" / "report" / "correlation.json").read_text())
    assert corr["labels"] == ["sq1", "rsq"]
