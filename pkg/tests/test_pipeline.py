from decimal import Decimal

import pytest

from clirgen import pipeline
from clirgen.config import PipelineConfig
from clirgen.generation import BackendTerminalError, MockBackend, load_checkpoint
from clirgen.manifest import manifest_identity_violations
from clirgen.pipeline import (
    PipelineError,
    artifact,
    failure_rate,
    run_pipeline,
    stage_generate,
    stage_validate,
    stage_emit,
)
from clirgen.records import read_json, read_jsonl
from conftest import DATA


def news_config(workdir=None, **tweaks) -> PipelineConfig:
    cfg = PipelineConfig()
    cfg.corpus.input_path = str(DATA / "news_corpus.jsonl")
    cfg.corpus.window_tokens = 60
    cfg.corpus.stride_tokens = 30
    cfg.mining.pair_count = 15
    cfg.mining.rng_seed = 17
    cfg.mining.min_passage_chars = 200
    cfg.mining.candidate_pool_size = 300
    cfg.generation.target_rate = 100_000
    cfg.report.figures = False
    for key, value in tweaks.items():
        section, attr = key.split(".")
        setattr(getattr(cfg, section), attr, value)
    return cfg


def tweet_config() -> PipelineConfig:
    cfg = PipelineConfig()
    cfg.corpus.input_path = str(DATA / "tweet_corpus.jsonl")
    cfg.corpus.genre = "tweet_thread"
    cfg.corpus.window_tokens = 60
    cfg.corpus.stride_tokens = 30
    cfg.mining.mode = "tweet"
    cfg.mining.pair_count = 0
    cfg.mining.min_passage_chars = 25
    cfg.mining.seed_queries_path = str(DATA / "seed_queries.tsv")
    cfg.mining.candidate_pool_size = 300
    cfg.generation.target_rate = 100_000
    cfg.report.figures = False
    return cfg


class TestEndToEnd:
    def test_news_run_produces_all_artifacts_and_identities(self, tmp_path):
        manifest = run_pipeline(news_config(), tmp_path)
        for name in ("passages", "index", "pairs", "renders", "checkpoint",
                     "queries", "triples", "tsv", "manifest"):
            assert artifact(tmp_path, name).exists(), name
        assert manifest_identity_violations(manifest) == []
        assert manifest["pairs"]["emitted"] == 15
        assert manifest["validation"]["valid"] > 0
        # the manifest is reproducible from the stage files
        stats_on_disk = read_json(artifact(tmp_path, "validation_stats"))
        assert stats_on_disk["valid"] == manifest["validation"]["valid"]
        triple_rows = list(read_jsonl(artifact(tmp_path, "triples")))
        assert len(triple_rows) == manifest["queries"]["generated"]

    def test_mock_runs_byte_identical(self, tmp_path):
        run_pipeline(news_config(), tmp_path / "a")
        run_pipeline(news_config(), tmp_path / "b")
        for name in ("passages", "pairs", "queries", "triples", "tsv"):
            assert artifact(tmp_path / "a", name).read_bytes() == artifact(
                tmp_path / "b", name
            ).read_bytes(), f"{name} differs between identical runs"

    def test_tweet_run_strips_urls_and_validates(self, tmp_path):
        manifest = run_pipeline(tweet_config(), tmp_path)
        assert manifest["corpus"]["urls_stripped"] > 0
        assert manifest["validation"]["valid"] > 0
        assert manifest_identity_violations(manifest) == []
        for rec in read_jsonl(artifact(tmp_path, "passages")):
            assert "t.co/" not in rec["text"]

    def test_tsv_exports_only_valid_triples(self, tmp_path):
        manifest = run_pipeline(news_config(), tmp_path)
        rows = artifact(tmp_path, "tsv").read_text(encoding="utf-8").splitlines()
        assert len(rows) == manifest["validation"]["valid"]
        for row in rows:
            assert len(row.split("\t")) == 3

    def test_empty_corpus_fatal_at_indexing_with_manifest(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        cfg = news_config(**{"corpus.input_path": str(empty)})
        with pytest.raises(PipelineError, match="empty corpus"):
            run_pipeline(cfg, tmp_path / "w")
        manifest = read_json(artifact(tmp_path / "w", "manifest"))
        assert manifest["corpus"]["passages_emitted"] == 0

    def test_missing_input_fatal(self, tmp_path):
        cfg = news_config(**{"corpus.input_path": str(tmp_path / "nope.jsonl")})
        with pytest.raises(PipelineError):
            run_pipeline(cfg, tmp_path / "w")

    def test_stagewise_rerun_from_files_matches_full_run(self, tmp_path):
        cfg = news_config()
        run_pipeline(cfg, tmp_path / "full")
        # re-run the later stages from the artifact files alone
        import shutil

        partial = tmp_path / "partial"
        partial.mkdir()
        for name in ("passages", "corpus_stats", "index", "pairs", "mine_stats"):
            shutil.copy(artifact(tmp_path / "full", name), artifact(partial, name))
        stage_generate(cfg, partial)
        stage_validate(cfg, partial)
        stage_emit(cfg, partial)
        for name in ("queries", "triples", "tsv"):
            assert artifact(partial, name).read_bytes() == artifact(
                tmp_path / "full", name
            ).read_bytes()

    def test_cost_arithmetic_with_explicit_rate(self, tmp_path):
        cfg = news_config(**{"generation.unit_cost_per_1k": "0.02"})
        manifest = run_pipeline(cfg, tmp_path)
        outcomes = load_checkpoint(artifact(tmp_path, "checkpoint"))
        expected = sum(
            (Decimal(o.prompt_tokens + o.output_tokens) * Decimal("0.02") / 1000
             for o in outcomes.values() if o.status == "ok"),
            Decimal("0"),
        )
        assert Decimal(manifest["cost"]["total_usd"]) == expected
        assert manifest["tokens"]["total"] == sum(
            o.prompt_tokens + o.output_tokens for o in outcomes.values() if o.status == "ok"
        )

    def test_generation_kill_and_resume_same_triples(self, tmp_path, monkeypatch):
        cfg = news_config()
        clean = tmp_path / "clean"
        run_pipeline(cfg, clean)

        resumed = tmp_path / "resumed"
        resumed.mkdir()
        import shutil

        for name in ("passages", "corpus_stats", "index", "pairs", "mine_stats"):
            shutil.copy(artifact(clean, name), artifact(resumed, name))

        class Dying(MockBackend):
            def __init__(self, allow):
                super().__init__()
                self.allow = allow
                self.calls = 0

            def generate(self, prompt, max_output_tokens):
                self.calls += 1
                if self.calls > self.allow:
                    raise RuntimeError("simulated kill")
                return super().generate(prompt, max_output_tokens)

        monkeypatch.setattr(pipeline, "_make_backend", lambda _cfg: Dying(allow=6))
        cfg_serial = news_config(**{"generation.max_concurrent": 1})
        with pytest.raises(RuntimeError, match="simulated kill"):
            stage_generate(cfg_serial, resumed)
        completed = load_checkpoint(artifact(resumed, "checkpoint"))
        assert 0 < len(completed) < 15

        monkeypatch.setattr(pipeline, "_make_backend", lambda _cfg: MockBackend())
        stage_generate(cfg, resumed)
        stage_validate(cfg, resumed)
        stage_emit(cfg, resumed)
        assert artifact(resumed, "triples").read_bytes() == artifact(clean, "triples").read_bytes()
        assert artifact(resumed, "tsv").read_bytes() == artifact(clean, "tsv").read_bytes()

    def test_failed_prompts_counted_and_rate_computed(self, tmp_path, monkeypatch):
        class Flaky(MockBackend):
            def generate(self, prompt, max_output_tokens):
                if MockBackend.prompt_key(prompt)[0] in "0123":  # ~25% of prompts
                    raise BackendTerminalError("policy")
                return super().generate(prompt, max_output_tokens)

        monkeypatch.setattr(pipeline, "_make_backend", lambda _cfg: Flaky())
        manifest = run_pipeline(news_config(), tmp_path)
        p = manifest["prompts"]
        assert p["failed"] > 0
        assert p["issued"] == p["succeeded"] + p["failed"]
        assert failure_rate(manifest) == pytest.approx(p["failed"] / p["issued"])
        assert manifest_identity_violations(manifest) == []


class TestStageErrors:
    def test_generation_stage_wraps_unexpected_errors(self, tmp_path, monkeypatch):
        # a PipelineError surfaces with the manifest already written
        cfg = news_config()

        def boom(_cfg, _workdir):
            raise ValueError("backend exploded")

        monkeypatch.setattr(pipeline, "stage_generate", boom)
        with pytest.raises(PipelineError, match="backend exploded"):
            run_pipeline(cfg, tmp_path)
        assert artifact(tmp_path, "manifest").exists()
