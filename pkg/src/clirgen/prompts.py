"""Prompt rendering under a token budget, and response parsing.

The generation backend is asked, for each passage of a pair, for five
English one-liners that only that passage supports. Responses come back in
every imaginable layout, so the parser is deliberately forgiving: it never
raises, and every anomaly is surfaced as a warning instead.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

from .text import is_cjk, tokenize_with_spans

DEFAULT_TWEET_ADDITION = (
    "No response should require the recipient to have seen the previous responses."
)
MIN_PASSAGE_TOKENS = 20
MIN_QUERY_WORDS = 3


class BudgetError(Exception):
    """The pair cannot be made to fit the model's input window."""


def estimate_tokens(text: str) -> int:
    """Cheap upper-ish estimate: 1 token per Han/kana char, 1 per 4 other
    chars, plus a 10% safety margin. Pluggable wherever a budget is
    enforced; swap in the backend's real tokenizer for tight packing."""
    han = sum(1 for ch in text if is_cjk(ch))
    other = len(text) - han
    return math.ceil((han + other / 4.0) * 1.1)


def truncate_to_tokens(
    text: str, max_tokens: int, estimator: Callable[[str], int] = estimate_tokens
) -> str:
    """Longest word-boundary prefix whose estimate fits max_tokens."""
    if estimator(text) <= max_tokens:
        return text
    spans = tokenize_with_spans(text)
    lo, hi = 1, len(spans)  # keep at least one token
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if estimator(text[: spans[mid - 1].end]) <= max_tokens:
            lo = mid
        else:
            hi = mid - 1
    return text[: spans[lo - 1].end]


@dataclass
class PromptTemplate:
    body: str
    tweet_addition: str = DEFAULT_TWEET_ADDITION
    queries_per_side: int = 5

    def __post_init__(self):
        if self.body.count("{first}") != 1 or self.body.count("{second}") != 1:
            raise ValueError("template body must contain {first} and {second} exactly once")


def load_template(path: str | Path | None = None, queries_per_side: int = 5) -> PromptTemplate:
    if path is None:
        body = resources.files("clirgen").joinpath("templates/prompt.txt").read_text("utf-8")
    else:
        body = Path(path).read_text(encoding="utf-8")
    return PromptTemplate(body=body, queries_per_side=queries_per_side)


@dataclass
class TokenBudget:
    model_input_limit: int = 4000
    prompt_overhead_tokens: int = 100
    reserved_output_tokens: int = 512
    estimator: Callable[[str], int] = estimate_tokens


@dataclass
class RenderedPrompt:
    pair_id: str
    text: str
    first_text: str
    second_text: str
    truncated: bool
    estimated_tokens: int


def _fill(body: str, first: str, second: str) -> str:
    # Literal splicing, not str.format: passages routinely contain braces.
    pre, rest = body.split("{first}")
    mid, post = rest.split("{second}")
    return pre + first + mid + second + post


def render(
    pair,
    template: PromptTemplate,
    budget: TokenBudget,
    genre: str = "news",
) -> RenderedPrompt:
    """Substitute the pair's passages into the template, fitting the budget.

    The positive passage fills {first}, the negative {second}. Tweet-genre
    prompts get the standalone-responses sentence appended (thread replies
    otherwise produce queries that lean on earlier lines). When the
    estimate exceeds the budget, both passages are truncated proportionally
    at word boundaries; pairs that exceed the raw input window, or that
    truncation would cut below 20 tokens a side, are rejected.
    """
    first, second = pair.positive.text, pair.negative.text
    if not first or not second:
        raise ValueError(f"{pair.pair_id}: empty passage")
    est = budget.estimator
    overhead = max(budget.prompt_overhead_tokens, est(_fill(template.body, "", "")))
    available = budget.model_input_limit - budget.reserved_output_tokens - overhead
    e1, e2 = est(first), est(second)
    truncated = False
    if e1 + e2 > budget.model_input_limit:
        raise BudgetError(
            f"{pair.pair_id}: passages estimate to {e1 + e2} tokens, "
            f"over the {budget.model_input_limit}-token input window"
        )
    if e1 + e2 > available:
        if available < 2 * MIN_PASSAGE_TOKENS:
            raise BudgetError(f"{pair.pair_id}: budget leaves no room for passages")
        scale = available / (e1 + e2)
        t1, t2 = int(e1 * scale), int(e2 * scale)
        if t1 < MIN_PASSAGE_TOKENS or t2 < MIN_PASSAGE_TOKENS:
            raise BudgetError(
                f"{pair.pair_id}: truncation would leave {min(t1, t2)} tokens in a passage"
            )
        first = truncate_to_tokens(first, t1, est)
        second = truncate_to_tokens(second, t2, est)
        truncated = True
    text = _fill(template.body, first, second)
    if genre in ("tweet", "tweet_thread"):
        text = text.rstrip("\n") + " " + template.tweet_addition + "\n"
    return RenderedPrompt(
        pair_id=pair.pair_id,
        text=text,
        first_text=first,
        second_text=second,
        truncated=truncated,
        estimated_tokens=est(text),
    )


@dataclass
class GeneratedQuery:
    pair_id: str
    target: str  # "A" (positive) or "B" (negative)
    text: str
    raw_line: str

    def to_record(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "target": self.target,
            "text": self.text,
            "raw_line": self.raw_line,
        }


@dataclass
class ParseWarning:
    pair_id: str
    kind: str
    detail: str = ""


# Header shapes seen in the wild: "Document A:", "For document A -",
# "Passage B", bare "A:". Case-insensitive, fixed set, no ML.
_A_HEADERS = [
    re.compile(r"^\s*(?:for\s+)?(?:document|doc|passage)\s+\(?a\)?\b\s*[:.)\-–]?\s*(.*)$", re.I),
    re.compile(r"^\s*\(?a\)?\s*:\s*(.*)$", re.I),
]
_B_HEADERS = [
    re.compile(r"^\s*(?:for\s+)?(?:document|doc|passage)\s+\(?b\)?\b\s*[:.)\-–]?\s*(.*)$", re.I),
    re.compile(r"^\s*\(?b\)?\s*:\s*(.*)$", re.I),
]
_BULLET_RE = re.compile(r"^\s*(?:[-*•–—·>]+\s*|\(?\d{1,2}[.):]+\s*)+")
_QUOTES = " \t\"'“”‘’"


def _match_header(line: str, patterns) -> str | None:
    for pat in patterns:
        m = pat.match(line)
        if m:
            return m.group(1).strip()
    return None


def _clean_line(line: str) -> str:
    return _BULLET_RE.sub("", line).strip(_QUOTES)


def parse_response(
    pair_id: str,
    response_text: str,
    queries_per_side: int = 5,
) -> tuple[list[GeneratedQuery], list[ParseWarning]]:
    """Split a free-text response into per-target queries.

    Looks for Document A / Document B section headers; without them, the
    non-empty lines are halved in order (first half -> A) and a warning is
    recorded. Bullets, list numerals, and wrapping quotes are stripped;
    lines under 3 words are dropped; at most 2 * queries_per_side queries
    are retained per pair. Never raises.
    """
    warnings: list[ParseWarning] = []
    raw_lines = [ln for ln in response_text.splitlines() if ln.strip()]
    if not raw_lines:
        warnings.append(ParseWarning(pair_id, "empty_response"))
        return [], warnings

    a_idx = b_idx = None
    a_inline = b_inline = ""
    for i, ln in enumerate(raw_lines):
        if a_idx is None:
            rest = _match_header(ln, _A_HEADERS)
            if rest is not None:
                a_idx, a_inline = i, rest
                continue
        if b_idx is None and (a_idx is None or i > a_idx):
            rest = _match_header(ln, _B_HEADERS)
            if rest is not None:
                b_idx, b_inline = i, rest

    blocks: list[tuple[str, list[str]]] = []
    if a_idx is not None and b_idx is not None and a_idx < b_idx:
        a_lines = ([a_inline] if a_inline else []) + raw_lines[a_idx + 1 : b_idx]
        b_lines = ([b_inline] if b_inline else []) + raw_lines[b_idx + 1 :]
        blocks = [("A", a_lines), ("B", b_lines)]
    else:
        if len(raw_lines) < 2:
            warnings.append(ParseWarning(pair_id, "unusable_response", raw_lines[0][:80]))
            return [], warnings
        warnings.append(ParseWarning(pair_id, "missing_headers"))
        half = (len(raw_lines) + 1) // 2
        blocks = [("A", raw_lines[:half]), ("B", raw_lines[half:])]

    queries: list[GeneratedQuery] = []
    kept_per_side = {"A": 0, "B": 0}
    cap = 2 * queries_per_side
    overflowed = False
    for target, lines in blocks:
        for raw in lines:
            cleaned = _clean_line(raw)
            if not cleaned:
                continue
            if len(cleaned.split()) < MIN_QUERY_WORDS:
                warnings.append(ParseWarning(pair_id, "short_line_dropped", cleaned[:80]))
                continue
            if len(queries) >= cap:
                overflowed = True
                break
            queries.append(GeneratedQuery(pair_id, target, cleaned, raw))
            kept_per_side[target] += 1
    if overflowed:
        warnings.append(ParseWarning(pair_id, "overflow_trimmed", f"cap={cap}"))
    for target in ("A", "B"):
        if kept_per_side[target] != queries_per_side:
            warnings.append(
                ParseWarning(
                    pair_id,
                    "count_mismatch",
                    f"{target}: {kept_per_side[target]} of {queries_per_side}",
                )
            )
    if not queries:
        warnings.append(ParseWarning(pair_id, "no_queries"))
    return queries, warnings
