import json


from clirgen.cli import main
from clirgen.records import read_json
from conftest import DATA


def _write_config(tmp_path, extra=""):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        f"""
[corpus]
input_path = "{DATA / 'news_corpus.jsonl'}"
genre = "news"
lang = "rus"
window_tokens = 60
stride_tokens = 30

[mining]
mode = "news"
pair_count = 8
rng_seed = 17
min_passage_chars = 200
candidate_pool_size = 300

[generation]
backend = "mock"
target_rate = 100000.0

[report]
figures = false
{extra}
""",
        encoding="utf-8",
    )
    return cfg


class TestRunCommand:
    def test_run_succeeds_and_writes_manifest(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        code = main(["run", "--config", str(cfg), "--workdir", str(tmp_path / "out")])
        assert code == 0
        assert "valid triples:" in capsys.readouterr().out
        manifest = read_json(tmp_path / "out" / "manifest.json")
        assert manifest["pairs"]["emitted"] == 8

    def test_run_missing_corpus_exit_1(self, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text('[corpus]\ninput_path = "/nonexistent.jsonl"\n', encoding="utf-8")
        assert main(["run", "--config", str(cfg), "--workdir", str(tmp_path / "o")]) == 1

    def test_unknown_config_key_exit_1(self, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("[mining]\nmoed = 3\n", encoding="utf-8")
        assert main(["run", "--config", str(cfg), "--workdir", str(tmp_path / "o")]) == 1

    def test_tau_zero_config_rejected(self, tmp_path):
        cfg = _write_config(tmp_path, extra="[validation]\ntau = 0.0\n")
        assert main(["run", "--config", str(cfg), "--workdir", str(tmp_path / "o")]) == 1

    def test_failure_rate_above_threshold_exit_2(self, tmp_path, monkeypatch):
        from clirgen import pipeline
        from clirgen.generation import BackendTerminalError, MockBackend

        class MostlyBroken(MockBackend):
            def generate(self, prompt, max_output_tokens):
                if MockBackend.prompt_key(prompt)[0] not in "01":  # ~87% fail
                    raise BackendTerminalError("policy")
                return super().generate(prompt, max_output_tokens)

        monkeypatch.setattr(pipeline, "_make_backend", lambda _cfg: MostlyBroken())
        cfg = _write_config(tmp_path)
        code = main(["run", "--config", str(cfg), "--workdir", str(tmp_path / "out")])
        assert code == 2
        # the run still wrote its artifacts and manifest
        manifest = read_json(tmp_path / "out" / "manifest.json")
        assert manifest["prompts"]["failed"] > 0


class TestStageCommands:
    def test_stage_by_stage_matches_run(self, tmp_path):
        cfg = _write_config(tmp_path)
        out_run = tmp_path / "all_at_once"
        out_stage = tmp_path / "stage_by_stage"
        assert main(["run", "--config", str(cfg), "--workdir", str(out_run)]) == 0
        for command in ("ingest", "mine", "generate", "validate", "emit"):
            argv = [command, "--config", str(cfg), "--workdir", str(out_stage)]
            assert main(argv) == 0, command
            if command == "ingest":
                assert main(["index", "build", "--config", str(cfg),
                             "--workdir", str(out_stage)]) == 0
        assert (out_stage / "triples.jsonl").read_bytes() == (
            out_run / "triples.jsonl"
        ).read_bytes()

    def test_index_search_debug_output(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        workdir = tmp_path / "w"
        assert main(["ingest", "--config", str(cfg), "--workdir", str(workdir)]) == 0
        assert main(["index", "build", "--config", str(cfg), "--workdir", str(workdir)]) == 0
        first_passage = json.loads((workdir / "passages.jsonl").read_text().splitlines()[0])
        query_word = first_passage["text"].split()[0]
        code = main(["index", "search", "--index", str(workdir / "index.jsonl"),
                     "--query", query_word, "-k", "3"])
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert 1 <= len(out) <= 3
        rank, score, pid = out[0].split("\t")
        assert rank == "1"


class TestStatsCommand:
    def test_stats_prints_and_renders_figures(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        workdir = tmp_path / "out"
        main(["run", "--config", str(cfg), "--workdir", str(workdir)])
        capsys.readouterr()
        code = main(["stats", "--workdir", str(workdir), "--figures",
                     "--outdir", str(tmp_path / "rep")])
        assert code == 0
        out = capsys.readouterr().out
        assert "per pair:" in out
        assert (tmp_path / "rep" / "fanout_hist.png").exists()
        assert (tmp_path / "rep" / "report.tsv").exists()


class TestAssessCommand:
    def test_assess_reads_labels_from_stdin(self, tmp_path, capsys, monkeypatch):
        import io

        cfg = _write_config(tmp_path)
        workdir = tmp_path / "out"
        main(["run", "--config", str(cfg), "--workdir", str(workdir)])
        capsys.readouterr()
        monkeypatch.setattr("sys.stdin", io.StringIO("1\n1\n5\n"))
        code = main([
            "assess", "--triples", str(workdir / "triples.jsonl"),
            "--passages", str(workdir / "passages.jsonl"),
            "--sample-size", "3", "--seed", "5",
            "--session", str(tmp_path / "labels.jsonl"),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "strict accuracy:  66.7%" in out
        assert "lenient accuracy: 100.0%" in out
        assert len((tmp_path / "labels.jsonl").read_text().splitlines()) == 3
