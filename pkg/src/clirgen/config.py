"""Declarative run configuration. Every pipeline constant is a named key;
the defaults are the documented operating point."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(Exception):
    pass


@dataclass
class CorpusSection:
    input_path: str = ""
    genre: str = "news"
    lang: str = "zho"
    window_tokens: int = 180
    stride_tokens: int = 90


@dataclass
class Bm25Section:
    k1: float = 0.9
    b: float = 0.4


@dataclass
class MiningSection:
    mode: str = "news"
    pair_count: int = 50
    rng_seed: int = 13
    ratio_threshold: float | None = None  # None -> regimen default (news .65 / tweet .8)
    min_passage_chars: int | None = None  # None -> per-language default
    candidate_pool_size: int = 1000
    lcs_min_outside_chars: int = 20
    lcs_min_outside_frac: float = 0.40
    seed_queries_path: str | None = None  # tweet mode: TSV of (id, query)


@dataclass
class PromptSection:
    queries_per_side: int = 5
    model_input_limit: int = 4000
    prompt_overhead_tokens: int = 100
    reserved_output_tokens: int = 512
    template_path: str | None = None


@dataclass
class GenerationSection:
    backend: str = "mock"  # "mock" | "http"
    api_url: str | None = None
    target_rate: float = 2.0
    max_concurrent: int = 10
    max_retries: int = 3
    max_output_tokens: int = 512
    unit_cost_per_1k: str | None = None  # None -> 0.02 for http, 0 for mock
    fixtures_path: str | None = None


@dataclass
class ValidationSection:
    tau: float = 0.15
    scorer: str = "lexical"  # "lexical" | "http"
    scorer_url: str | None = None
    lexical_temperature: float = 0.1


@dataclass
class ReportSection:
    figures: bool = True


@dataclass
class PipelineConfig:
    corpus: CorpusSection = field(default_factory=CorpusSection)
    bm25: Bm25Section = field(default_factory=Bm25Section)
    mining: MiningSection = field(default_factory=MiningSection)
    prompt: PromptSection = field(default_factory=PromptSection)
    generation: GenerationSection = field(default_factory=GenerationSection)
    validation: ValidationSection = field(default_factory=ValidationSection)
    report: ReportSection = field(default_factory=ReportSection)
    error_rate_threshold: float = 0.05

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "corpus": CorpusSection,
    "bm25": Bm25Section,
    "mining": MiningSection,
    "prompt": PromptSection,
    "generation": GenerationSection,
    "validation": ValidationSection,
    "report": ReportSection,
}


def _build_section(cls, data: dict, name: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"[{name}] has unknown keys: {', '.join(sorted(unknown))}")
    return cls(**data)


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")
    cfg = PipelineConfig()
    for name, section in data.items():
        if name == "error_rate_threshold":
            cfg.error_rate_threshold = float(section)
            continue
        if name not in _SECTIONS:
            raise ConfigError(f"unknown config section [{name}]")
        if not isinstance(section, dict):
            raise ConfigError(f"[{name}] must be a table")
        setattr(cfg, name, _build_section(_SECTIONS[name], section, name))
    validate_config(cfg)
    return cfg


def validate_config(cfg: PipelineConfig) -> None:
    if cfg.corpus.genre not in ("news", "tweet_thread"):
        raise ConfigError(f"corpus.genre must be news or tweet_thread, got {cfg.corpus.genre!r}")
    if cfg.mining.mode not in ("news", "tweet"):
        raise ConfigError(f"mining.mode must be news or tweet, got {cfg.mining.mode!r}")
    if cfg.mining.mode == "tweet" and not cfg.mining.seed_queries_path:
        raise ConfigError("tweet mining requires mining.seed_queries_path")
    if cfg.validation.tau <= 0:
        raise ConfigError("validation.tau must be > 0")
    if cfg.generation.backend not in ("mock", "http"):
        raise ConfigError(f"generation.backend must be mock or http, got {cfg.generation.backend!r}")
    if cfg.generation.backend == "http" and not cfg.generation.api_url:
        raise ConfigError("http backend requires generation.api_url")
    if cfg.validation.scorer not in ("lexical", "http"):
        raise ConfigError(f"validation.scorer must be lexical or http, got {cfg.validation.scorer!r}")
    if cfg.validation.scorer == "http" and not cfg.validation.scorer_url:
        raise ConfigError("http scorer requires validation.scorer_url")
    if not 0 < cfg.corpus.stride_tokens <= cfg.corpus.window_tokens:
        raise ConfigError("corpus.stride_tokens must be in (0, window_tokens]")
    if not 0.0 <= cfg.error_rate_threshold <= 1.0:
        raise ConfigError("error_rate_threshold must be in [0, 1]")
