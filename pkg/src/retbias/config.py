"""Experiment configuration: one JSON file drives every stage.

Relative input paths are resolved against the config file's directory;
output paths are resolved against ``output_dir``. ``RETBIAS_OUTPUT_DIR``
overrides ``output_dir``.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import PreprocessConfig
from .errors import ConfigError
from .index import Bm25Params
from .querygen import LogConfig, Sq1Config, Sq2Config, Sq3Config
from .retrievability import UtilityFunction
from .rsq import RsqConfig

OUTPUT_ENV = "RETBIAS_OUTPUT_DIR"
METHODS = ("sq1", "sq2", "sq3", "rsq", "log")
_TOP_KEYS = {"name", "corpus", "preprocessing", "bm25", "cutoff", "utility", "query_sets", "analysis",
             "output_dir", "workers", "seed", "chunk_size"}


@dataclass
class QuerySetSpec:
    name: str
    method: str
    params: dict
    output: Path

    def build_config(self, seed: int, preprocess: PreprocessConfig, base: Path):
        p = dict(self.params)
        try:
            if self.method == "sq1":
                return Sq1Config(**p)
            if self.method == "sq2":
                return Sq2Config(**p)
            if self.method == "sq3":
                p.setdefault("seed", seed)
                return Sq3Config(**p)
            if self.method == "rsq":
                for key in ("pretagged_path", "patterns_path"):
                    if p.get(key):
                        p[key] = str(_resolve(base, p[key]))
                return RsqConfig(**p)
            p.pop("path", None)
            p.pop("format", None)
            return LogConfig(preprocess=preprocess, **p)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"query set {self.name!r}: {e}") from None


@dataclass
class ExperimentConfig:
    base_dir: Path
    name: str
    corpus_path: Path
    corpus_format: str
    preprocessing: dict
    bm25: Bm25Params
    utility: UtilityFunction
    query_sets: list[QuerySetSpec]
    output_dir: Path
    workers: int = 1
    seed: int = 0
    chunk_size: int = 2000
    analysis: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def preprocess(self) -> PreprocessConfig:
        return PreprocessConfig.from_dict(self.preprocessing)

    @property
    def index_dir(self) -> Path:
        return self.output_dir / "index"

    def vector_path(self, name: str) -> Path:
        return self.output_dir / "vectors" / f"{name}.csv"

    @property
    def report_dir(self) -> Path:
        return self.output_dir / "report"

    def query_set(self, key: str) -> QuerySetSpec:
        """Look up a query-set entry by name, falling back to the first with that method."""
        for qs in self.query_sets:
            if qs.name == key:
                return qs
        for qs in self.query_sets:
            if qs.method == key:
                return qs
        if key in METHODS:
            return QuerySetSpec(key, key, {}, self.output_dir / "queries" / f"{key}.tsv")
        raise ConfigError(f"no query set named {key!r}")

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()[:16]

    def log_source(self, spec: QuerySetSpec) -> tuple[Path, str]:
        if "path" not in spec.params:
            raise ConfigError(f"query set {spec.name!r}: method 'log' needs config.path")
        return _resolve(self.base_dir, spec.params["path"]), spec.params.get("format", "lines")


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def parse_config(raw: dict, base_dir: Path, check_paths: bool = True) -> ExperimentConfig:
    _require(isinstance(raw, dict), "config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")
    corpus = raw.get("corpus")
    _require(isinstance(corpus, dict) and "path" in corpus, "config needs corpus.path")
    fmt = corpus.get("format", "jsonl")
    _require(fmt in ("jsonl", "trec_text"), f"unknown corpus format {fmt!r}")
    corpus_path = _resolve(base_dir, corpus["path"])

    pre = raw.get("preprocessing") or {}
    _require(set(pre) <= {"stopwords_path", "stemming"}, f"unknown preprocessing keys: {sorted(set(pre))}")
    if pre.get("stopwords_path"):
        pre = {**pre, "stopwords_path": str(_resolve(base_dir, pre["stopwords_path"]))}

    try:
        bm25 = Bm25Params(**(raw.get("bm25") or {}))
        util = raw.get("utility") or {}
        utility = UtilityFunction(util.get("kind", "cumulative"), int(raw.get("cutoff", 100)),
                                  float(util.get("beta", 2.0)))
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None

    out_dir = os.environ.get(OUTPUT_ENV) or raw.get("output_dir", "out")
    output_dir = _resolve(base_dir, out_dir)

    specs = []
    names = set()
    for i, entry in enumerate(raw.get("query_sets") or []):
        _require(isinstance(entry, dict) and entry.get("method") in METHODS,
                 f"query_sets[{i}]: method must be one of {METHODS}")
        name = entry.get("name", entry["method"])
        _require(name not in names, f"duplicate query set name {name!r}")
        names.add(name)
        output = entry.get("output") or f"queries/{name}.tsv"
        specs.append(QuerySetSpec(name, entry["method"], dict(entry.get("config") or {}),
                                  _resolve(output_dir, output)))

    workers = raw.get("workers", 1)
    chunk = raw.get("chunk_size", 2000)
    _require(isinstance(workers, int) and workers >= 1, "workers must be a positive integer")
    _require(isinstance(chunk, int) and chunk >= 1, "chunk_size must be a positive integer")
    cfg = ExperimentConfig(
        base_dir=base_dir, name=raw.get("name") or corpus_path.stem, corpus_path=corpus_path,
        corpus_format=fmt, preprocessing=pre, bm25=bm25, utility=utility, query_sets=specs,
        output_dir=output_dir, workers=workers, seed=int(raw.get("seed", 0)), chunk_size=chunk,
        analysis=dict(raw.get("analysis") or {}), raw=raw,
    )
    # construct every method config now so bad parameters fail validation
    for spec in specs:
        spec.build_config(cfg.seed, PreprocessConfig(), base_dir)
    if check_paths:
        _check_paths(cfg)
    return cfg


def _check_paths(cfg: ExperimentConfig):
    missing = []
    if not cfg.corpus_path.is_file():
        missing.append(str(cfg.corpus_path))
    if cfg.preprocessing.get("stopwords_path") and not Path(cfg.preprocessing["stopwords_path"]).is_file():
        missing.append(cfg.preprocessing["stopwords_path"])
    for spec in cfg.query_sets:
        if spec.method == "log":
            path, _ = cfg.log_source(spec)
            if not path.is_file():
                missing.append(str(path))
        for key in ("pretagged_path", "patterns_path"):
            if spec.params.get(key) and not _resolve(cfg.base_dir, spec.params[key]).is_file():
                missing.append(str(_resolve(cfg.base_dir, spec.params[key])))
    if missing:
        raise ConfigError("missing input files: " + ", ".join(missing))


def load_config(path: str | Path, check_paths: bool = True) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    return parse_config(raw, path.resolve().parent, check_paths)
