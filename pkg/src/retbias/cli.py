"""Command-line pipeline: index -> gen-queries -> run -> report.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .analysis import bias_report, correlate_all, lorenz
from .config import ExperimentConfig, load_config
from .corpus import ingest, preprocess_corpus
from .errors import ConfigError, DataError, FingerprintMismatch
from .index import Bm25Params, build_index, load_snapshot, save_snapshot
from .querygen import (QuerySet, filter_query_log, generate_sq1, generate_sq2, generate_sq3,
                       LogFilterStats, read_query_log)
from .retrievability import RetrievabilityVector, run_queries
from .rsq import generate_rsq
from .svg import lorenz_svg

log = logging.getLogger("retbias")


# --- manifest -------------------------------------------------------------


def digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _rel(path: Path, root: Path) -> str:
    try:
        return str(Path(path).resolve().relative_to(root.resolve()))
    except ValueError:
        return str(Path(path).resolve())


def record_stage(cfg: ExperimentConfig, stage: str, started: float, inputs: Sequence[Path],
                 outputs: Sequence[Path], stats: dict | None = None) -> dict:
    """Add or replace one stage entry in ``manifest.json``, atomically."""
    root = cfg.output_dir
    root.mkdir(parents=True, exist_ok=True)
    path = root / "manifest.json"
    manifest = json.loads(path.read_text()) if path.exists() else {"stages": {}}
    claimed = {_rel(o, root) for o in outputs}
    # an output belongs to exactly one stage: drop stale claims elsewhere
    for other in manifest["stages"].values():
        for key in claimed & set(other.get("outputs", {})):
            del other["outputs"][key]
    manifest.update(config_fingerprint=cfg.fingerprint(), tool_version=__version__)
    entry = {
        "elapsed_s": round(time.perf_counter() - started, 3),
        "inputs": {_rel(p, root): digest(p) for p in inputs},
        "outputs": {_rel(p, root): digest(p) for p in outputs},
    }
    if stats:
        entry["stats"] = stats
    manifest["stages"][stage] = entry
    tmp = path.with_name("manifest.json.tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
    return entry


# --- stages ---------------------------------------------------------------


def _documents(cfg: ExperimentConfig):
    return preprocess_corpus(ingest(cfg.corpus_path, cfg.corpus_format), cfg.preprocess())


def _load_index(cfg: ExperimentConfig):
    if not (cfg.index_dir / "docs.tsv").exists():
        raise DataError(f"no index snapshot in {cfg.index_dir}; run 'index' first")
    idx = load_snapshot(cfg.index_dir)
    expected = cfg.preprocess().fingerprint()
    if idx.preprocess_fingerprint != expected:
        raise FingerprintMismatch("preprocessing", idx.preprocess_fingerprint or "-", expected)
    return idx


def cmd_index(cfg: ExperimentConfig) -> dict:
    started = time.perf_counter()
    if not cfg.corpus_path.is_file():
        raise ConfigError(f"corpus {cfg.corpus_path} not found")
    idx = build_index(_documents(cfg), cfg.preprocess().fingerprint())
    files = save_snapshot(idx, cfg.index_dir)
    stats = idx.stats()
    record_stage(cfg, "index", started, [cfg.corpus_path], files, stats)
    log.info("indexed %d documents, %d terms, avgdl %.2f", stats["n_docs"], stats["vocab_size"], stats["avgdl"])
    return stats


def cmd_gen_queries(cfg: ExperimentConfig, key: str, out: Path | None = None) -> Path:
    started = time.perf_counter()
    spec = cfg.query_set(key)
    pre = cfg.preprocess()
    method_cfg = spec.build_config(cfg.seed, pre, cfg.base_dir)
    idx = _load_index(cfg)
    inputs = [cfg.corpus_path]
    if spec.method == "sq1":
        qs = generate_sq1(_documents(cfg), idx, method_cfg, pre)
    elif spec.method == "sq2":
        qs = generate_sq2(_documents(cfg), idx, method_cfg, pre)
    elif spec.method == "sq3":
        qs = generate_sq3(_documents(cfg), idx, method_cfg, pre)
    elif spec.method == "rsq":
        qs = generate_rsq(ingest(cfg.corpus_path, cfg.corpus_format), method_cfg, pre)
        if method_cfg.pretagged_path:
            inputs.append(Path(method_cfg.pretagged_path))
    else:
        path, fmt = cfg.log_source(spec)
        stats = LogFilterStats()
        qs = filter_query_log(read_query_log(path, fmt), idx, method_cfg, stats)
        inputs = [path]
    out = Path(out) if out else spec.output
    qs.write(out)
    record_stage(cfg, f"gen-queries:{spec.name}", started, inputs, [out], {"queries": len(qs)})
    log.info("%s: %d queries -> %s", spec.name, len(qs), out)
    return out


def cmd_run(cfg: ExperimentConfig, queries: Path, out: Path | None = None, workers: int | None = None,
            mode: str | None = None) -> Path:
    """Accumulate one query set; ``mode`` forces a retrieval mode for every query."""
    started = time.perf_counter()
    idx = _load_index(cfg)
    qs = QuerySet.read(queries)
    if mode:
        qs.queries = [replace(q, mode=mode) for q in qs.queries]
    if qs.preprocess_fingerprint != idx.preprocess_fingerprint:
        raise FingerprintMismatch("preprocessing", idx.preprocess_fingerprint or "-", qs.preprocess_fingerprint or "-")
    if not len(qs):
        log.warning("query set %s is empty; writing an all-zero vector", queries)
    out = Path(out) if out else cfg.vector_path(Path(queries).stem)
    out.parent.mkdir(parents=True, exist_ok=True)
    vec = run_queries(idx, cfg.bm25, qs, cfg.utility, workers=workers or cfg.workers,
                      chunk_size=cfg.chunk_size, checkpoint=out.with_name(out.name + ".ckpt"))
    vec.write(out)
    elapsed = time.perf_counter() - started
    record_stage(cfg, f"run:{out.stem}", started, [Path(queries), cfg.index_dir / "postings.bin"], [out],
                 {"queries": len(qs), "mass": vec.total})
    print(f"{out.stem}: {len(qs)} queries, mass {vec.total:g}, {elapsed:.2f}s")
    return out


def _fmt(x: float) -> str:
    return "n/a" if x != x else f"{x:.4f}"


def summary_markdown(cfg: ExperimentConfig, reports: dict, corr) -> str:
    lines = [f"# Retrievability bias: {cfg.name}", "",
             f"BM25 k1={cfg.bm25.k1:g} b={cfg.bm25.b:g}; {cfg.utility.kind} utility, cutoff c={cfg.utility.c}", "",
             "| Dataset | Query set | Queries | Documents | Total mass | Gini |",
             "|---|---|---:|---:|---:|---:|"]
    for label, rep in reports.items():
        lines.append(f"| {cfg.name} | {label} | {rep.query_count} | {rep.n_docs} | {rep.total_mass:g} | {_fmt(rep.gini)} |")
    if corr is not None:
        labels = corr.labels
        lines += ["", "## Correlation", "", "Upper triangle: Pearson's r. Lower triangle: Kendall's tau-b.", "",
                  "| | " + " | ".join(labels) + " |", "|---|" + "---:|" * len(labels)]
        for i, a in enumerate(labels):
            cells = []
            for j in range(len(labels)):
                if i == j:
                    cells.append("-")
                else:
                    cells.append(_fmt(corr.pearson[i, j] if j > i else corr.kendall[i, j]))
            lines.append(f"| {a} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def cmd_report(cfg: ExperimentConfig, vector_files: Sequence[Path], normalize: bool | None = None) -> list[Path]:
    started = time.perf_counter()
    if not vector_files:
        raise ConfigError("report needs at least one vector file")
    normalize = cfg.analysis.get("normalize", False) if normalize is None else normalize
    resolution = cfg.analysis.get("lorenz_resolution")
    plot_points = cfg.analysis.get("plot_points", 500)
    vectors: dict[str, RetrievabilityVector] = {}
    for f in vector_files:
        label = Path(f).stem
        if label in vectors:
            label = f"{label}#{len(vectors) + 1}"
        v = RetrievabilityVector.read(f)
        vectors[label] = v.normalized() if normalize else v
    out_dir = cfg.report_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: list[Path] = []
    reports = {}
    curves = {}
    for label, v in vectors.items():
        rep = bias_report(label, v, resolution)
        reports[label] = rep
        lorenz_path = out_dir / f"{label}.lorenz.csv"
        lorenz_path.write_text(rep.lorenz.to_csv())
        report_path = out_dir / f"{label}.json"
        report_path.write_text(json.dumps({
            "label": label, "provenance": rep.provenance, "gini": rep.gini, "n_docs": rep.n_docs,
            "total_mass": rep.total_mass, "query_count": rep.query_count, "normalized": bool(normalize),
            "lorenz": lorenz_path.name,
        }, indent=2) + "\n")
        outputs += [lorenz_path, report_path]
        curves[label] = lorenz(v, plot_points)
    corr = None
    if len(vectors) >= 2:
        pairs = cfg.analysis.get("pairs", "all")
        chosen = vectors
        if pairs != "all":
            keep = [label for label in vectors if any(label in p for p in pairs)]
            chosen = {label: vectors[label] for label in keep}
        corr = correlate_all(chosen) if len(chosen) >= 2 else None
        if corr is not None:
            corr_path = out_dir / "correlation.json"
            corr_path.write_text(json.dumps(corr.to_dict(), indent=2, allow_nan=False) + "\n")
            outputs.append(corr_path)
    svg_path = out_dir / "lorenz.svg"
    svg_path.write_text(lorenz_svg(curves, f"Lorenz curves: {cfg.name}"))
    md_path = out_dir / "summary.md"
    md_path.write_text(summary_markdown(cfg, reports, corr))
    outputs += [svg_path, md_path]
    record_stage(cfg, "report", started, [Path(f) for f in vector_files], outputs,
                 {label: rep.gini for label, rep in reports.items()})
    for label, rep in reports.items():
        print(f"{label}: gini {rep.gini:.4f} over {rep.n_docs} documents")
    return outputs


def cmd_pipeline(cfg: ExperimentConfig, workers: int | None = None, mode: str | None = None) -> list[Path]:
    if not cfg.query_sets:
        raise ConfigError("pipeline needs at least one entry in query_sets")
    cmd_index(cfg)
    vectors = []
    for spec in cfg.query_sets:
        qpath = cmd_gen_queries(cfg, spec.name)
        vectors.append(cmd_run(cfg, qpath, cfg.vector_path(spec.name), workers, mode))
    return cmd_report(cfg, vectors)


# --- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="retbias", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, type=Path, help="experiment JSON config")
        return p

    with_config(sub.add_parser("validate-config", help="check a config file and its input paths"))
    with_config(sub.add_parser("index", help="build the index snapshot"))
    p = with_config(sub.add_parser("gen-queries", help="generate one query set"))
    p.add_argument("--method", required=True, help="sq1|sq2|sq3|rsq|log, or a query-set name from the config")
    p.add_argument("--out", type=Path)
    p = with_config(sub.add_parser("run", help="accumulate retrievability for one query set"))
    p.add_argument("--queries", required=True, type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--workers", type=int)
    p = with_config(sub.add_parser("report", help="Gini, Lorenz and correlation report"))
    p.add_argument("vectors", nargs="+", type=Path)
    p.add_argument("--normalize", action="store_true", default=None, help="divide scores by query count")
    p = with_config(sub.add_parser("pipeline", help="index, every configured query set, run and report"))
    p.add_argument("--workers", type=int)
    for name in ("index", "gen-queries", "run", "report", "pipeline"):
        sp = sub.choices[name]
        sp.add_argument("--k1", type=float)
        sp.add_argument("--b", type=float)
        sp.add_argument("--cutoff", type=int)
    for name in ("run", "pipeline"):
        sub.choices[name].add_argument("--mode", choices=["disjunctive", "conjunctive"],
                                       help="force one retrieval mode for every query")
    return ap


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    try:
        if args.k1 is not None or args.b is not None:
            cfg.bm25 = Bm25Params(args.k1 if args.k1 is not None else cfg.bm25.k1,
                                  args.b if args.b is not None else cfg.bm25.b)
        if args.cutoff is not None:
            cfg.utility = replace(cfg.utility, c=args.cutoff)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "validate-config":
            print(f"{args.config}: ok ({len(cfg.query_sets)} query sets, output {cfg.output_dir})")
            return 0
        cfg = _apply_overrides(cfg, args)
        mode = getattr(args, "mode", None)
        if args.command == "index":
            stats = cmd_index(cfg)
            print(f"N={stats['n_docs']} avgdl={stats['avgdl']:.4f} vocabulary={stats['vocab_size']}")
        elif args.command == "gen-queries":
            print(cmd_gen_queries(cfg, args.method, args.out))
        elif args.command == "run":
            cmd_run(cfg, args.queries, args.out, args.workers, mode)
        elif args.command == "report":
            cmd_report(cfg, args.vectors, args.normalize)
        elif args.command == "pipeline":
            cmd_pipeline(cfg, args.workers, mode)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DataError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
