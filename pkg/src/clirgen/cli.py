"""Command-line entry points.

Subcommands mirror the pipeline stages (ingest, index, mine, generate,
validate, emit), plus run (everything), stats (report + figures), and
assess (interactive labeling). Exit codes: 0 success, 1 fatal config or
data error, 2 partial failure above the error-rate threshold.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config
from .records import read_json, read_jsonl

log = logging.getLogger("clirgen")

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


def _load_cfg(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    # CLI flags override the config file where both exist.
    for attr, section, key in (
        ("genre", "corpus", "genre"),
        ("lang", "corpus", "lang"),
        ("window", "corpus", "window_tokens"),
        ("stride", "corpus", "stride_tokens"),
        ("input", "corpus", "input_path"),
        ("mode", "mining", "mode"),
        ("ratio_threshold", "mining", "ratio_threshold"),
        ("min_chars", "mining", "min_passage_chars"),
        ("seed", "mining", "rng_seed"),
        ("count", "mining", "pair_count"),
        ("seed_queries", "mining", "seed_queries_path"),
        ("template", "prompt", "template_path"),
        ("backend", "generation", "backend"),
        ("rate", "generation", "target_rate"),
        ("concurrency", "generation", "max_concurrent"),
        ("max_output_tokens", "generation", "max_output_tokens"),
        ("tau", "validation", "tau"),
        ("scorer", "validation", "scorer"),
        ("scorer_url", "validation", "scorer_url"),
    ):
        val = getattr(args, attr, None)
        if val is not None:
            setattr(getattr(cfg, section), key, val)
    return cfg


def cmd_run(args) -> int:
    from .manifest import manifest_identity_violations
    from .pipeline import PipelineError, failure_rate, run_pipeline

    cfg = _load_cfg(args)
    try:
        manifest = run_pipeline(cfg, args.workdir)
    except PipelineError as exc:
        log.error("pipeline failed: %s", exc)
        return EXIT_FATAL
    problems = manifest_identity_violations(manifest)
    for p in problems:
        log.error("manifest identity violated: %s", p)
    if problems:
        return EXIT_FATAL
    if failure_rate(manifest) > cfg.error_rate_threshold:
        log.error("failed-prompt rate %.1f%% above threshold %.1f%%",
                  failure_rate(manifest) * 100, cfg.error_rate_threshold * 100)
        return EXIT_PARTIAL
    print(f"valid triples: {manifest['validation']['valid']} "
          f"({manifest['validation']['triples_per_pair']:.2f} per pair), "
          f"cost ${manifest['cost']['total_usd']}")
    return EXIT_OK


def _stage(args, name: str) -> int:
    from . import pipeline

    cfg = _load_cfg(args)
    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    try:
        getattr(pipeline, f"stage_{name}")(cfg, workdir)
    except pipeline.PipelineError as exc:
        log.error("%s failed: %s", name, exc)
        return EXIT_FATAL
    return EXIT_OK


def cmd_index_search(args) -> int:
    from .bm25 import load_index, search

    index = load_index(args.index)
    for hit in search(index, args.query, args.k):
        print(f"{hit.rank}\t{hit.score:.4f}\t{hit.passage_id}")
    return EXIT_OK


def cmd_stats(args) -> int:
    from .manifest import manifest_identity_violations
    from .report import write_report

    workdir = Path(args.workdir)
    manifest = read_json(workdir / "manifest.json")
    problems = manifest_identity_violations(manifest)
    for p in problems:
        log.error("manifest identity violated: %s", p)
    v, c = manifest["validation"], manifest["cost"]
    print(f"pairs: {manifest['pairs'].get('emitted', 0)}")
    print(f"generated: {manifest['queries']['generated']}  valid: {v['valid']}  "
          f"per pair: {v['triples_per_pair']:.2f}")
    print(f"tokens: {manifest['tokens']['total']}  cost: ${c['total_usd']}")
    if args.figures:
        written = write_report(workdir, args.outdir or workdir / "report")
        for path in written:
            print(f"wrote {path}")
    return EXIT_FATAL if problems else EXIT_OK


def cmd_assess(args) -> int:
    from .assess import run_session

    triples = [t for t in read_jsonl(args.triples) if t["valid"] or args.include_rejected]
    if not triples:
        log.error("no triples to assess in %s", args.triples)
        return EXIT_FATAL
    passages = {}
    if args.passages:
        passages = {rec["passage_id"]: rec["text"] for rec in read_jsonl(args.passages)}
    session = args.session or str(Path(args.triples).with_suffix(".assessment.jsonl"))
    run_session(
        triples,
        passages,
        sample_size=args.sample_size,
        rng_seed=args.seed if args.seed is not None else 13,
        session_path=session,
        in_stream=sys.stdin,
        out_stream=sys.stdout,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clirgen",
        description="Manufacture cross-language retrieval training triples from a raw corpus.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, workdir=True):
        p.add_argument("--config", help="TOML config file")
        if workdir:
            p.add_argument("--workdir", default="out", help="stage artifact directory")

    p = sub.add_parser("run", help="run every stage end to end")
    common(p)
    p.add_argument("--input", help="corpus file (one JSON document per line)")
    p.add_argument("--backend", choices=["mock", "http"])
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ingest", help="normalize and segment the corpus")
    common(p)
    p.add_argument("--input", help="corpus file (one JSON document per line)")
    p.add_argument("--genre", choices=["news", "tweet_thread"])
    p.add_argument("--lang")
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.set_defaults(func=lambda a: _stage(a, "ingest"))

    p = sub.add_parser("index", help="build or query the BM25 index")
    isub = p.add_subparsers(dest="index_command", required=True)
    pb = isub.add_parser("build", help="build the index from passages")
    common(pb)
    pb.set_defaults(func=lambda a: _stage(a, "index"))
    ps = isub.add_parser("search", help="debug search against a saved index")
    ps.add_argument("--index", required=True)
    ps.add_argument("--query", required=True)
    ps.add_argument("-k", type=int, default=10)
    ps.set_defaults(func=cmd_index_search)

    p = sub.add_parser("mine", help="select positive/negative passage pairs")
    common(p)
    p.add_argument("--mode", choices=["news", "tweet"])
    p.add_argument("--ratio-threshold", dest="ratio_threshold", type=float)
    p.add_argument("--min-chars", dest="min_chars", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--seed-queries", dest="seed_queries", help="TSV of (id, query) for tweet mode")
    p.add_argument("--count", type=int)
    p.set_defaults(func=lambda a: _stage(a, "mine"))

    p = sub.add_parser("generate", help="render prompts and call the backend")
    common(p)
    p.add_argument("--backend", choices=["mock", "http"])
    p.add_argument("--template", help="prompt template file with {first}/{second} slots")
    p.add_argument("--rate", type=float)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--max-output-tokens", dest="max_output_tokens", type=int)
    p.set_defaults(func=lambda a: _stage(a, "generate"))

    p = sub.add_parser("validate", help="score queries and filter triples")
    common(p)
    p.add_argument("--tau", type=float)
    p.add_argument("--scorer", choices=["lexical", "http"])
    p.add_argument("--scorer-url", dest="scorer_url")
    p.set_defaults(func=lambda a: _stage(a, "validate"))

    p = sub.add_parser("emit", help="export the tab-separated training file")
    common(p)
    p.set_defaults(func=lambda a: _stage(a, "emit"))

    p = sub.add_parser("stats", help="print the manifest and render report figures")
    common(p)
    p.add_argument("--figures", action="store_true", help="render PNG figures")
    p.add_argument("--outdir", help="where to put the report (default: workdir/report)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("assess", help="manually label a sample of triples")
    p.add_argument("--triples", required=True)
    p.add_argument("--passages", help="passages file, for displaying texts")
    p.add_argument("--sample-size", dest="sample_size", type=int, default=60)
    p.add_argument("--seed", type=int)
    p.add_argument("--session", help="label file (resumable); default next to triples")
    p.add_argument("--include-rejected", action="store_true")
    p.set_defaults(func=cmd_assess)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_FATAL
    except FileNotFoundError as exc:
        log.error("missing file: %s", exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
