"""Stage orchestration. Each stage reads and writes line-delimited artifact
files in the work directory; the files are the only inter-stage contract,
so any stage can be re-run from disk. The manifest is written last (or on
failure, as far as the run got)."""
from __future__ import annotations

import json
import logging
import time
from decimal import Decimal
from pathlib import Path

from . import bm25, corpus, pairs, prompts, validate as validation
from .config import PipelineConfig
from .generation import HttpBackend, MockBackend, ThrottleConfig, run_batch, total_cost_of
from .manifest import build_manifest
from .records import read_jsonl, write_json, write_jsonl

log = logging.getLogger(__name__)

ARTIFACTS = {
    "passages": "passages.jsonl",
    "corpus_stats": "corpus_stats.json",
    "index": "index.jsonl",
    "pairs": "pairs.jsonl",
    "mine_stats": "mine_stats.json",
    "renders": "renders.jsonl",
    "checkpoint": "responses.jsonl",
    "queries": "queries.jsonl",
    "generate_stats": "generate_stats.json",
    "triples": "triples.jsonl",
    "validation_stats": "validation_stats.json",
    "tsv": "triples.tsv",
    "manifest": "manifest.json",
}


class PipelineError(Exception):
    """Fatal stage error; the manifest-so-far has been written."""


def artifact(workdir: str | Path, name: str) -> Path:
    return Path(workdir) / ARTIFACTS[name]


def load_passages(workdir: str | Path) -> dict[str, corpus.Passage]:
    return {
        rec["passage_id"]: corpus.passage_from_record(rec)
        for rec in read_jsonl(artifact(workdir, "passages"))
    }


def stage_ingest(cfg: PipelineConfig, workdir: Path) -> dict:
    c = cfg.corpus
    if not c.input_path or not Path(c.input_path).exists():
        raise PipelineError(f"corpus input not found: {c.input_path!r}")
    stats = corpus.CorpusStats()
    out = artifact(workdir, "passages")
    with Path(c.input_path).open("r", encoding="utf-8") as f, \
            out.open("w", encoding="utf-8") as dst:
        for doc in corpus.ingest(f, genre=c.genre, lang=c.lang, stats=stats):
            for p in corpus.segment(doc, c.window_tokens, c.stride_tokens):
                dst.write(json.dumps(corpus.passage_to_record(p), ensure_ascii=False) + "\n")
                stats.passages_emitted += 1
    write_json(artifact(workdir, "corpus_stats"), stats.as_dict())
    log.info("ingest: %d docs -> %d passages", stats.documents_read, stats.passages_emitted)
    return stats.as_dict()


def stage_index(cfg: PipelineConfig, workdir: Path) -> None:
    passages = load_passages(workdir)
    if not passages:
        raise PipelineError("cannot index an empty corpus (no passages)")
    index = bm25.build_index(passages.values(), k1=cfg.bm25.k1, b=cfg.bm25.b)
    bm25.save_index(index, artifact(workdir, "index"))
    log.info("index: %d passages, avg length %.1f", index.passage_count, index.avg_doc_len)


def load_seed_queries(path: str | Path) -> list[tuple[str, str]]:
    """TSV of (id, query); lines without a tab are skipped."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "\t" not in line:
            continue
        sid, text = line.split("\t", 1)
        if sid.strip() and text.strip():
            out.append((sid.strip(), text.strip()))
    return out


def stage_mine(cfg: PipelineConfig, workdir: Path) -> dict:
    index = bm25.load_index(artifact(workdir, "index"))
    passages = load_passages(workdir)
    m = cfg.mining
    overrides = {}
    if m.ratio_threshold is not None:
        overrides["ratio_threshold"] = m.ratio_threshold
    if m.min_passage_chars is not None:
        overrides["min_passage_chars"] = m.min_passage_chars
    pcfg = pairs.default_config(
        m.mode,
        cfg.corpus.lang,
        candidate_pool_size=m.candidate_pool_size,
        lcs_min_outside_chars=m.lcs_min_outside_chars,
        lcs_min_outside_frac=m.lcs_min_outside_frac,
        **overrides,
    )
    if m.mode == "news":
        mined, stats = pairs.mine_news_pairs(index, passages, m.pair_count, m.rng_seed, pcfg)
    else:
        seeds = load_seed_queries(m.seed_queries_path)
        if not seeds:
            raise PipelineError(f"no seed queries in {m.seed_queries_path}")
        mined, stats = pairs.mine_tweet_pairs(index, passages, seeds, pcfg)
        mined = mined[: m.pair_count] if m.pair_count else mined
        stats.emitted = len(mined)
    write_jsonl(artifact(workdir, "pairs"), (p.to_record() for p in mined))
    write_json(artifact(workdir, "mine_stats"), stats.as_dict())
    log.info("mine: %d pairs (%d attempts)", stats.emitted, stats.attempts or stats.seeds_total)
    return stats.as_dict()


def _make_backend(cfg: PipelineConfig):
    g = cfg.generation
    if g.backend == "mock":
        unit = Decimal(g.unit_cost_per_1k) if g.unit_cost_per_1k is not None else Decimal("0")
        fixtures = None
        if g.fixtures_path:
            fixtures = {rec["key"]: rec["text"] for rec in read_jsonl(g.fixtures_path)}
        return MockBackend(fixtures=fixtures, unit_cost_per_1k=unit)
    unit = Decimal(g.unit_cost_per_1k) if g.unit_cost_per_1k is not None else Decimal("0.02")
    return HttpBackend(g.api_url, unit_cost_per_1k=unit)


def stage_generate(cfg: PipelineConfig, workdir: Path) -> dict:
    passages = load_passages(workdir)
    pair_list = [
        pairs.pair_from_record(rec, passages)
        for rec in read_jsonl(artifact(workdir, "pairs"))
    ]
    template = prompts.load_template(cfg.prompt.template_path, cfg.prompt.queries_per_side)
    budget = prompts.TokenBudget(
        model_input_limit=cfg.prompt.model_input_limit,
        prompt_overhead_tokens=cfg.prompt.prompt_overhead_tokens,
        reserved_output_tokens=cfg.prompt.reserved_output_tokens,
    )
    rendered = []
    budget_rejected = 0
    for pair in pair_list:
        try:
            rendered.append(prompts.render(pair, template, budget, genre=cfg.corpus.genre))
        except prompts.BudgetError as exc:
            budget_rejected += 1
            log.warning("budget: %s", exc)
    write_jsonl(
        artifact(workdir, "renders"),
        (
            {
                "pair_id": r.pair_id,
                "first_text": r.first_text,
                "second_text": r.second_text,
                "truncated": r.truncated,
                "estimated_tokens": r.estimated_tokens,
            }
            for r in rendered
        ),
    )
    backend = _make_backend(cfg)
    throttle = ThrottleConfig(
        max_concurrent=cfg.generation.max_concurrent,
        target_rate=cfg.generation.target_rate,
        max_retries=cfg.generation.max_retries,
    )
    outcomes = run_batch(
        [(r.pair_id, r.text) for r in rendered],
        backend,
        throttle,
        artifact(workdir, "checkpoint"),
        max_output_tokens=cfg.generation.max_output_tokens,
    )
    queries: list[dict] = []
    warning_count = 0
    for outcome in outcomes:
        if outcome.status != "ok":
            continue
        parsed, warns = prompts.parse_response(
            outcome.pair_id, outcome.response or "", cfg.prompt.queries_per_side
        )
        warning_count += len(warns)
        queries.extend(q.to_record() for q in parsed)
    write_jsonl(artifact(workdir, "queries"), queries)
    ok = [o for o in outcomes if o.status == "ok"]
    stats = {
        "issued": len(outcomes),
        "succeeded": len(ok),
        "failed": len(outcomes) - len(ok),
        "truncated": sum(1 for r in rendered if r.truncated),
        "budget_rejected": budget_rejected,
        "tokens_estimated": sum(1 for o in ok if o.tokens_estimated),
        "prompt_tokens": sum(o.prompt_tokens for o in ok),
        "output_tokens": sum(o.output_tokens for o in ok),
        "unit_cost_per_1k": str(backend.unit_cost_per_1k),
        "total_cost_usd": str(total_cost_of(outcomes, backend.unit_cost_per_1k)),
        "parse_warnings": warning_count,
        "queries": len(queries),
    }
    write_json(artifact(workdir, "generate_stats"), stats)
    log.info("generate: %d ok / %d failed, %d queries", len(ok), stats["failed"], len(queries))
    return stats


def _make_scorer(cfg: PipelineConfig):
    v = cfg.validation
    if v.scorer == "lexical":
        return validation.LexicalScorer(temperature=v.lexical_temperature)
    return validation.HttpScorer(v.scorer_url)


def stage_validate(cfg: PipelineConfig, workdir: Path) -> dict:
    passages = load_passages(workdir)
    pair_map = {
        rec["pair_id"]: pairs.pair_from_record(rec, passages)
        for rec in read_jsonl(artifact(workdir, "pairs"))
    }
    pair_texts = {
        rec["pair_id"]: (rec["first_text"], rec["second_text"])
        for rec in read_jsonl(artifact(workdir, "renders"))
    }
    queries = [
        prompts.GeneratedQuery(rec["pair_id"], rec["target"], rec["text"], rec["raw_line"])
        for rec in read_jsonl(artifact(workdir, "queries"))
    ]
    scorer = _make_scorer(cfg)
    triples, stats = validation.validate(
        queries, pair_map, scorer, tau=cfg.validation.tau, pair_texts=pair_texts
    )
    write_jsonl(artifact(workdir, "triples"), (t.to_record() for t in triples))
    write_json(artifact(workdir, "validation_stats"), stats.as_dict())
    log.info("validate: %d/%d valid (%.2f per pair)",
             stats.valid, stats.generated, stats.triples_per_pair)
    return stats.as_dict()


def stage_emit(cfg: PipelineConfig, workdir: Path) -> int:
    """Write the tab-separated training export: query, positive text,
    negative text - valid triples only, original passage texts."""
    passages = load_passages(workdir)
    n = 0
    with artifact(workdir, "tsv").open("w", encoding="utf-8") as f:
        for rec in read_jsonl(artifact(workdir, "triples")):
            if not rec["valid"]:
                continue
            pos = passages[rec["positive_id"]].text.replace("\t", " ").replace("\n", " ")
            neg = passages[rec["negative_id"]].text.replace("\t", " ").replace("\n", " ")
            query = rec["query"].replace("\t", " ")
            f.write(f"{query}\t{pos}\t{neg}\n")
            n += 1
    log.info("emit: %d training rows", n)
    return n


def run_pipeline(cfg: PipelineConfig, workdir: str | Path) -> dict:
    """Execute every stage in order and write the manifest.

    On a fatal stage error the manifest-so-far is still written and a
    PipelineError is raised. With the mock backend and a fixed seed, two
    runs produce byte-identical triples files.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    collected = {
        "corpus_stats": {},
        "mine_stats": {},
        "generate_stats": {},
        "validation_stats": {},
    }

    def finish() -> dict:
        manifest = build_manifest(
            cfg.as_dict(),
            collected["corpus_stats"],
            collected["mine_stats"],
            collected["generate_stats"],
            collected["validation_stats"],
            duration_seconds=round(time.monotonic() - started, 3),
        )
        write_json(artifact(workdir, "manifest"), manifest)
        return manifest

    try:
        collected["corpus_stats"] = stage_ingest(cfg, workdir)
        stage_index(cfg, workdir)
        collected["mine_stats"] = stage_mine(cfg, workdir)
        collected["generate_stats"] = stage_generate(cfg, workdir)
        collected["validation_stats"] = stage_validate(cfg, workdir)
        stage_emit(cfg, workdir)
    except Exception as exc:
        finish()
        if isinstance(exc, PipelineError):
            raise
        raise PipelineError(str(exc)) from exc
    manifest = finish()
    if cfg.report.figures:
        try:
            from .report import write_report

            write_report(workdir, workdir / "report")
        except Exception as exc:  # figures are best-effort, never fail the run
            log.warning("report rendering failed: %s", exc)
    return manifest


def failure_rate(manifest: dict) -> float:
    issued = manifest["prompts"]["issued"]
    return manifest["prompts"]["failed"] / issued if issued else 0.0
