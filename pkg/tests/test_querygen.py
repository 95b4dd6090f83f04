import math
from itertools import combinations

import pytest

from conftest import index_of
from retbias.corpus import PreprocessConfig, RawDocument, preprocess_corpus
from retbias.errors import DataError
from retbias.index import CONJUNCTIVE, DISJUNCTIVE, Bm25Params, build_index, retrieve
from retbias.querygen import (LogConfig, LogFilterStats, Query, QuerySet, Sq1Config, Sq2Config, Sq3Config,
                              count_bigrams, discrimination_scores, filter_query_log, generate_sq1,
                              generate_sq2, generate_sq3, rank_discriminative_terms, read_query_log)


def terms_of(qs):
    return [q.terms for q in qs]


# --- QuerySet -------------------------------------------------------------


def test_query_validation():
    with pytest.raises(ValueError):
        Query(())
    with pytest.raises(ValueError):
        Query(("a",) * 5)
    with pytest.raises(ValueError):
        Query(("a",), mode="fuzzy")


def test_queryset_roundtrip(tmp_path):
    qs = QuerySet([Query(("a",)), Query(("a", "b"), 0.5, CONJUNCTIVE)], "SQ2", "f00", "abc")
    path = qs.write(tmp_path / "q.tsv")
    lines = path.read_text().splitlines()
    assert lines[0] == "# provenance=SQ2 config_fingerprint=f00 preprocess_fingerprint=abc"
    assert lines[1:] == ["qid\tmode\tweight\tterms", "q1\td\t1.0\ta", "q2\tc\t0.5\ta b"]
    assert QuerySet.read(path) == qs


def test_queryset_read_rejects_garbage(tmp_path):
    p = tmp_path / "q.tsv"
    p.write_text("# provenance=X\nqid\tmode\tweight\tterms\nq1\tz\t1.0\ta\n")
    with pytest.raises(DataError, match=":3"):
        QuerySet.read(p)


def test_shards_partition_queries():
    qs = QuerySet([Query((f"t{i}",)) for i in range(10)], "SQ1", "x")
    for k in (1, 2, 3, 4, 8, 16):
        parts = qs.shards(k)
        assert len(parts) == k
        assert [q for p in parts for q in p] == qs.queries


# --- SQ1 ------------------------------------------------------------------


def test_sq1_unigram_threshold():
    docs, idx = index_of({"d1": "alpha " * 6 + "beta " * 5})
    assert terms_of(generate_sq1(docs, idx)) == [("alpha",)]


def test_sq1_bigram_from_repeated_doc():
    docs, idx = index_of({f"d{i:02d}": "a b a b" for i in range(20)})
    got = terms_of(generate_sq1(docs, idx))
    assert ("a", "b") in got
    assert count_bigrams(docs)[("a", "b")] == 40


def test_sq1_bigram_threshold():
    # ("x","y") occurs 20 times, ("p","q") 19 times
    mapping = {f"d{i:02d}": "x y" for i in range(20)}
    mapping.update({f"e{i:02d}": "p q" for i in range(19)})
    docs, idx = index_of(mapping)
    bigrams = [t for t in terms_of(generate_sq1(docs, idx)) if len(t) == 2]
    assert bigrams == [("x", "y")]


def test_sq1_bigram_order_and_cap():
    mapping = {f"d{i:02d}": "x y x y" for i in range(15)}
    mapping.update({f"e{i:02d}": "p q" for i in range(25)})
    docs, idx = index_of(mapping)
    qs = generate_sq1(docs, idx, Sq1Config(min_bigram_cf=15))
    counts = count_bigrams(docs)
    bigrams = [t for t in terms_of(qs) if len(t) == 2]
    # x y: 30, p q: 25, y x: 15
    assert bigrams == [("x", "y"), ("p", "q"), ("y", "x")]
    freqs = [counts[b] for b in bigrams]
    assert freqs == sorted(freqs, reverse=True)
    capped = generate_sq1(docs, idx, Sq1Config(min_bigram_cf=15, max_bigrams=1))
    assert [t for t in terms_of(capped) if len(t) == 2] == [("x", "y")]
    assert all(q.mode == DISJUNCTIVE for q in qs)


def test_sq1_empty_corpus():
    assert len(generate_sq1([], build_index([]))) == 0


# --- SQ2 ------------------------------------------------------------------


def test_sq2_enumeration_example():
    docs, idx = index_of({"d1": "a a b b c", "f1": "x", "f2": "y", "f3": "z"})
    qs = generate_sq2(docs, idx)
    assert terms_of(qs) == [("a",), ("b",), ("a", "b")]
    assert all(q.mode == CONJUNCTIVE for q in qs)


def test_sq2_df_ceiling_excludes_term():
    # "a" is in 2 of 4 documents (> 25%)
    docs, idx = index_of({"d1": "a a b b", "d2": "a", "f1": "x", "f2": "y"})
    assert terms_of(generate_sq2(docs, idx)) == [("b",)]


def test_sq2_dedup_across_documents():
    docs, idx = index_of({"d1": "a a b b", "d2": "a a b b"})
    qs = generate_sq2(docs, idx, Sq2Config(df_ceiling_fraction=1.0))
    assert terms_of(qs) == [("a",), ("b",), ("a", "b")]


def test_sq2_cap_warns(caplog):
    docs, idx = index_of({"d1": "a a b b c c d d e e"})
    qs = generate_sq2(docs, idx, Sq2Config(df_ceiling_fraction=1.0, max_combinations_per_doc=7))
    assert len(qs) == 7
    assert "exceed" in caplog.text


def test_sq2_exhaustive_on_small_corpus():
    mapping = {"d1": "a a b b c c d d e e", "d2": "c c f f g", "d3": "h", "d4": "i", "d5": "j j"}
    docs, idx = index_of(mapping)
    qs = generate_sq2(docs, idx, Sq2Config(df_ceiling_fraction=0.25))
    expected = set()
    for d in docs:
        elig = sorted({t for t in d.terms if d.terms.count(t) >= 2 and idx.lexicon[t].df <= 0.25 * idx.N})
        for k in range(1, 5):
            expected |= set(combinations(elig, k))
    assert set(terms_of(qs)) == expected
    assert len(qs) == len(expected)
    assert all(idx.lexicon[t].df <= 0.25 * idx.N for q in qs for t in q.terms)


# --- SQ3 ------------------------------------------------------------------


def test_sq3_score_hand_arithmetic():
    # p_s(a) = 2/4, p_c(a) = 2/8
    scores = discrimination_scores({"a": 2, "b": 2}, {"a": 2, "b": 6})
    assert abs(scores["a"] - 0.5 * math.log(2)) < 1e-12
    assert abs(scores["a"] - 0.3466) < 1e-4


def test_sq3_identical_models_tie_lexicographically():
    cf = {"b": 1, "c": 1, "a": 1}
    scores = discrimination_scores(cf, cf)
    assert set(scores.values()) == {0.0}
    assert rank_discriminative_terms(scores, 3) == ["a", "b", "c"]


def test_sq3_single_kept_term_gives_no_pairs():
    docs, idx = index_of({"d1": "a b c", "d2": "a d"})
    qs = generate_sq3(docs, idx, Sq3Config(num_clusters=1, terms_per_cluster=1))
    assert terms_of(qs) == [("a",)]


def test_sq3_pairs_consecutive_ranked_terms():
    docs, idx = index_of({"d1": "a b c", "d2": "a d"})
    qs = generate_sq3(docs, idx, Sq3Config(num_clusters=1, terms_per_cluster=10))
    singles = [t for t in terms_of(qs) if len(t) == 1]
    pairs = [t for t in terms_of(qs) if len(t) == 2]
    assert pairs == [(a[0], b[0]) for a, b in zip(singles, singles[1:])]


def test_sq3_deterministic_and_validated():
    mapping = {f"d{i}": ("red car " if i % 2 else "tax law ") * (1 + i % 3) for i in range(20)}
    docs, idx = index_of(mapping)
    cfg = Sq3Config(num_clusters=2, terms_per_cluster=3, seed=1)
    assert generate_sq3(docs, idx, cfg).to_tsv() == generate_sq3(docs, idx, cfg).to_tsv()
    with pytest.raises(ValueError):
        generate_sq3(docs, idx, Sq3Config(num_clusters=50))


# --- query log ------------------------------------------------------------


@pytest.fixture
def solar_index():
    cfg = PreprocessConfig()
    docs = list(preprocess_corpus([RawDocument("d1", "Solar energy is renewable"),
                                   RawDocument("d2", "Wind energy and income tax")], cfg))
    return cfg, build_index(docs, cfg.fingerprint())


def test_log_filter_examples(solar_index):
    cfg, idx = solar_index
    stats = LogFilterStats()
    qs = filter_query_log(["www.example.com", "solar energy", "solar zzzgarble", "Solar Energy", "the of"],
                          idx, LogConfig(cfg), stats)
    assert terms_of(qs) == [("solar", "energi")]
    assert (stats.with_period, stats.out_of_vocabulary, stats.empty, stats.duplicates) == (1, 1, 1, 1)
    assert qs.provenance == "LOG"
    assert qs.preprocess_fingerprint == idx.preprocess_fingerprint


def test_log_filter_length_limit(solar_index):
    cfg, idx = solar_index
    qs = filter_query_log(["solar energy wind income tax"], idx, LogConfig(cfg))
    assert len(qs) == 0


def test_read_query_log_formats(tmp_path):
    p = tmp_path / "log.txt"
    p.write_bytes(b"solar energy\n\xff\xfe\nwind\n")
    assert list(read_query_log(p)) == ["solar energy", None, "wind"]
    aol = tmp_path / "aol.tsv"
    aol.write_text("AnonID\tQuery\tQueryTime\n1\tincome tax\t2006\n2\n")
    assert list(read_query_log(aol, "aol")) == ["income tax", None]


# --- shared properties ----------------------------------------------------


def test_every_generated_query_has_a_candidate():
    mapping = {
        "d1": "red car red car fast road road",
        "d2": "tax law tax law income income",
        "d3": "red car tax law river river",
        "d4": "river bank bank road",
        "d5": "income tax law red",
    }
    docs, idx = index_of(mapping)
    sets = [
        generate_sq1(docs, idx, Sq1Config(min_unigram_cf=2, min_bigram_cf=2)),
        generate_sq2(docs, idx, Sq2Config(df_ceiling_fraction=1.0)),
        generate_sq3(docs, idx, Sq3Config(num_clusters=2, terms_per_cluster=4)),
    ]
    for qs in sets:
        assert len(qs)
        for q in qs:
            assert len(retrieve(idx, Bm25Params(), q.terms, 10, q.mode)) >= 1


def test_fingerprints_track_config():
    docs, idx = index_of({"d1": "a a b b"})
    a = generate_sq2(docs, idx, Sq2Config(df_ceiling_fraction=1.0))
    b = generate_sq2(docs, idx, Sq2Config(df_ceiling_fraction=0.9))
    assert a.config_fingerprint != b.config_fingerprint
    assert a.config_fingerprint == generate_sq2(docs, idx, Sq2Config(df_ceiling_fraction=1.0)).config_fingerprint
