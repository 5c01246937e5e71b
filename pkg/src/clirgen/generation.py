"""Batch dispatch to a text-generation backend.

Generation is the expensive stage, so every completed prompt is durably
appended to a checkpoint before anything else happens with it; a killed
run resumes without re-paying for completed prompts. The mock backend is
fully deterministic on the prompt text and is the only backend exercised
in CI.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .prompts import estimate_tokens

log = logging.getLogger(__name__)


class BackendError(Exception):
    pass


class BackendTransientError(BackendError):
    """Retryable: rate limits, 5xx, connection resets."""


class BackendTerminalError(BackendError):
    """Not retryable: auth failures, content policy, malformed request."""


@dataclass(frozen=True)
class GenerationResult:
    text: str
    prompt_tokens: int
    output_tokens: int
    tokens_estimated: bool = False


class GenerationBackend(Protocol):
    name: str
    unit_cost_per_1k: Decimal

    def generate(self, prompt: str, max_output_tokens: int) -> GenerationResult: ...


@dataclass(frozen=True)
class CostRecord:
    prompt_tokens: int
    output_tokens: int
    unit_cost_per_1k: Decimal

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.output_tokens

    @property
    def cost(self) -> Decimal:
        # Decimal throughout: record costs must sum to the manifest total
        # exactly, to the cent.
        return Decimal(self.total_tokens) * self.unit_cost_per_1k / Decimal(1000)


@dataclass
class ThrottleConfig:
    max_concurrent: int = 10
    target_rate: float = 2.0  # requests per second
    max_retries: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0

    def __post_init__(self):
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        if self.target_rate <= 0:
            raise ValueError("target_rate must be positive")


@dataclass
class BatchOutcome:
    pair_id: str
    status: str  # "ok" | "failed"
    response: str | None
    prompt_tokens: int
    output_tokens: int
    tokens_estimated: bool = False
    error: str | None = None
    attempts: int = 1

    def cost_record(self, unit_cost_per_1k: Decimal) -> CostRecord:
        return CostRecord(self.prompt_tokens, self.output_tokens, unit_cost_per_1k)

    def to_record(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "status": self.status,
            "response": self.response,
            "prompt_tokens": self.prompt_tokens,
            "output_tokens": self.output_tokens,
            "tokens_estimated": self.tokens_estimated,
            "error": self.error,
            "attempts": self.attempts,
        }


def outcome_from_record(rec: dict) -> BatchOutcome:
    return BatchOutcome(
        pair_id=rec["pair_id"],
        status=rec["status"],
        response=rec.get("response"),
        prompt_tokens=int(rec.get("prompt_tokens", 0)),
        output_tokens=int(rec.get("output_tokens", 0)),
        tokens_estimated=bool(rec.get("tokens_estimated", False)),
        error=rec.get("error"),
        attempts=int(rec.get("attempts", 1)),
    )


def total_cost_of(outcomes: Sequence[BatchOutcome], unit_cost_per_1k: Decimal) -> Decimal:
    """Exact sum of per-call costs over successful outcomes."""
    return sum(
        (o.cost_record(unit_cost_per_1k).cost for o in outcomes if o.status == "ok"),
        Decimal("0"),
    )


def load_checkpoint(path: str | Path) -> dict[str, BatchOutcome]:
    """Completed outcomes keyed by pair_id; tolerant of a torn final line
    (the run may have died mid-append)."""
    path = Path(path)
    done: dict[str, BatchOutcome] = {}
    if not path.exists():
        return done
    with path.open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                log.warning("checkpoint %s: dropping torn line", path)
                continue
            done[rec["pair_id"]] = outcome_from_record(rec)
    return done


class _RateLimiter:
    """Serializes request starts to at most `rate` per second."""

    def __init__(self, rate: float):
        self._interval = 1.0 / rate
        self._lock = threading.Lock()
        self._next_free = 0.0

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next_free)
            self._next_free = start + self._interval
        delay = start - now
        if delay > 0:
            time.sleep(delay)


def run_batch(
    prompts: Sequence[tuple[str, str]],
    backend: GenerationBackend,
    throttle: ThrottleConfig,
    checkpoint_path: str | Path,
    max_output_tokens: int = 512,
) -> list[BatchOutcome]:
    """Dispatch every prompt once, with bounded concurrency and rate.

    Each prompt yields exactly one outcome: a response, or a failure record
    after retries are exhausted (transient errors back off and retry;
    terminal errors fail immediately but the batch continues). Outcomes are
    appended to the checkpoint as they complete and returned in prompt
    order. Prompts already present in the checkpoint are not re-issued.
    Unexpected exceptions (anything that is not a BackendError) abort the
    batch; the checkpoint keeps what finished.
    """
    checkpoint_path = Path(checkpoint_path)
    done = load_checkpoint(checkpoint_path)
    todo = [(pid, p) for pid, p in prompts if pid not in done]
    if done:
        log.info("checkpoint %s: %d of %d prompts already completed",
                 checkpoint_path, len(prompts) - len(todo), len(prompts))
    limiter = _RateLimiter(throttle.target_rate)
    write_lock = threading.Lock()

    def one(pair_id: str, prompt: str) -> BatchOutcome:
        attempts = 0
        while True:
            attempts += 1
            limiter.wait()
            try:
                res = backend.generate(prompt, max_output_tokens)
                return BatchOutcome(
                    pair_id=pair_id,
                    status="ok",
                    response=res.text,
                    prompt_tokens=res.prompt_tokens,
                    output_tokens=res.output_tokens,
                    tokens_estimated=res.tokens_estimated,
                    attempts=attempts,
                )
            except BackendTerminalError as exc:
                return BatchOutcome(pair_id, "failed", None, 0, 0,
                                    error=str(exc), attempts=attempts)
            except BackendTransientError as exc:
                if attempts > throttle.max_retries:
                    return BatchOutcome(pair_id, "failed", None, 0, 0,
                                        error=f"retries exhausted: {exc}", attempts=attempts)
                delay = min(throttle.backoff_cap,
                            throttle.backoff_base * 2 ** (attempts - 1))
                time.sleep(delay)

    with checkpoint_path.open("a", encoding="utf-8") as ckpt:
        with ThreadPoolExecutor(max_workers=throttle.max_concurrent) as pool:
            futures = {pool.submit(one, pid, p): pid for pid, p in todo}
            try:
                for fut in as_completed(futures):
                    outcome = fut.result()
                    with write_lock:
                        ckpt.write(json.dumps(outcome.to_record(), ensure_ascii=False) + "\n")
                        ckpt.flush()
                        os.fsync(ckpt.fileno())
                    done[outcome.pair_id] = outcome
            except BaseException:
                pool.shutdown(wait=False, cancel_futures=True)
                raise
    missing = [pid for pid, _ in prompts if pid not in done]
    if missing:
        raise RuntimeError(f"batch incomplete: {len(missing)} prompts without outcomes")
    return [done[pid] for pid, _ in prompts]


_PROMPT_DOCS_RE = re.compile(r"document A: <<(.*?)>>.*?document B: <<(.*?)>>", re.S)
_LINE_SHAPES = (
    "The {0} situation and recent {1} developments",
    "Impact of {0} on {1} planning in the region",
    "Background on {0} and the {1} dispute",
    "Timeline of the {0} and {1} events",
    "How {0} relates to {1} this year",
    "Reactions to {0} among {1} groups",
)


class MockBackend:
    """Deterministic offline backend for tests and dry runs.

    Responses are keyed by a hash of the prompt: either a caller-supplied
    fixture, or a synthesized two-block answer built from words exclusive
    to each passage (plus occasional off-target or generic lines, so the
    downstream filter has something to reject). Free of charge by default.
    """

    name = "mock"

    def __init__(self, fixtures: dict[str, str] | None = None,
                 unit_cost_per_1k: Decimal = Decimal("0")):
        self.fixtures = fixtures or {}
        self.unit_cost_per_1k = unit_cost_per_1k

    @staticmethod
    def prompt_key(prompt: str) -> str:
        return hashlib.sha256(prompt.encode("utf-8")).hexdigest()

    def generate(self, prompt: str, max_output_tokens: int) -> GenerationResult:
        key = self.prompt_key(prompt)
        text = self.fixtures.get(key)
        if text is None:
            text = self._synthesize(prompt, key)
        return GenerationResult(
            text=text,
            prompt_tokens=estimate_tokens(prompt),
            output_tokens=estimate_tokens(text),
        )

    def _synthesize(self, prompt: str, key: str) -> str:
        rng = random.Random(int(key[:16], 16))
        m = _PROMPT_DOCS_RE.search(prompt)
        a_text, b_text = m.groups() if m else ("", "")
        a_words = sorted({w.casefold() for w in a_text.split() if len(w) >= 4 and w.isalpha()})
        b_words = sorted({w.casefold() for w in b_text.split() if len(w) >= 4 and w.isalpha()})
        a_only = [w for w in a_words if w not in b_words]
        b_only = [w for w in b_words if w not in a_words]
        shared = [w for w in a_words if w in b_words]

        def block(own: list[str], other: list[str]) -> list[str]:
            lines = []
            for i in range(rng.choice((4, 5, 6))):
                roll = rng.random()
                if roll < 0.12 and other:
                    pool = other  # points at the wrong passage -> inverted margin
                elif roll < 0.22 and shared:
                    pool = shared  # generic -> margin near zero
                else:
                    pool = own or shared or other or ["general", "report", "topic"]
                picks = rng.sample(pool, k=min(2, len(pool)))
                if len(picks) == 1:
                    picks = picks * 2
                shape = _LINE_SHAPES[rng.randrange(len(_LINE_SHAPES))]
                lines.append(f"{i + 1}. {shape.format(*picks)}")
            return lines

        out = ["Document A:"] + block(a_only, b_only) + ["", "Document B:"] + block(b_only, a_only)
        return "\n".join(out) + "\n"


class HttpBackend:
    """Minimal JSON-over-HTTP backend.

    POST {url} with {"prompt": ..., "max_tokens": ...}; expects
    {"text": ..., "prompt_tokens": int?, "output_tokens": int?}. Token
    counts missing from the response are estimated and flagged. The
    bearer token comes from GENERATION_API_KEY.
    """

    name = "http"

    def __init__(self, url: str, unit_cost_per_1k: Decimal = Decimal("0.02"),
                 timeout: float = 60.0, session: requests.Session | None = None):
        self.url = url
        self.unit_cost_per_1k = unit_cost_per_1k
        self.timeout = timeout
        self.session = session or requests.Session()

    def generate(self, prompt: str, max_output_tokens: int) -> GenerationResult:
        headers = {}
        api_key = os.environ.get("GENERATION_API_KEY")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            resp = self.session.post(
                self.url,
                json={"prompt": prompt, "max_tokens": max_output_tokens},
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise BackendTransientError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise BackendTransientError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendTerminalError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        body = resp.json()
        text = body.get("text", "")
        pt, ot = body.get("prompt_tokens"), body.get("output_tokens")
        estimated = pt is None or ot is None
        if pt is None:
            pt = estimate_tokens(prompt)
        if ot is None:
            ot = estimate_tokens(text)
        return GenerationResult(text, int(pt), int(ot), tokens_estimated=estimated)
