"""Triple scoring and the relevance-margin filter.

A generated query becomes a training triple once a scorer has judged both
passages: the triple is kept when the two-way softmax probability of the
positive exceeds the negative's by more than tau. The margin reduces to
tanh((score_pos - score_neg) / 2), so the accept test is equivalent to a
raw-score gap of 2*atanh(tau).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import requests

from .pairs import PassagePair
from .prompts import GeneratedQuery
from .text import tokens

REJECT_MARGIN = "margin_below_tau"
REJECT_INVERTED = "inverted"
REJECT_SCORER = "scorer_error"

DEFAULT_TAU = 0.15


class ScorerError(Exception):
    pass


class RelevanceScorer(Protocol):
    def score(self, query: str, passage: str) -> float: ...


def margin(score_pos: float, score_neg: float) -> float:
    """Two-way softmax probability difference, stable for large scores."""
    if not (math.isfinite(score_pos) and math.isfinite(score_neg)):
        raise ScorerError(f"non-finite scores: {score_pos}, {score_neg}")
    m = max(score_pos, score_neg)
    ea = math.exp(score_pos - m)
    eb = math.exp(score_neg - m)
    return (ea - eb) / (ea + eb)


def raw_score_threshold(tau: float) -> float:
    """The margin test restated on raw scores: gap > 2*atanh(tau)."""
    return 2.0 * math.atanh(tau)


@dataclass
class LexicalScorer:
    """Symmetrized token-overlap scorer: |q & p| / sqrt(|q| * |p|), divided
    by a temperature so margins spread over (-1, 1).

    Purely lexical and script-local - it is meaningless across scripts and
    exists so the pipeline runs end to end with no model dependency. Use
    the HTTP scorer for semantic, cross-language validation.
    """

    temperature: float = 0.1

    def score(self, query: str, passage: str) -> float:
        q = set(tokens(query, fold_case=True))
        p = set(tokens(passage, fold_case=True))
        if not q or not p:
            return 0.0
        return len(q & p) / math.sqrt(len(q) * len(p)) / self.temperature


class HttpScorer:
    """Client for the relevance-scoring service: POST {url}/score with
    {"items": [{"query", "passage"}, ...]} -> {"scores": [...]}."""

    def __init__(self, url: str, timeout: float = 60.0, token: str | None = None,
                 session: requests.Session | None = None):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.token = token
        self.session = session or requests.Session()

    def score(self, query: str, passage: str) -> float:
        return self.score_batch([(query, passage)])[0]

    def score_batch(self, items: Sequence[tuple[str, str]]) -> list[float]:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            resp = self.session.post(
                f"{self.url}/score",
                json={"items": [{"query": q, "passage": p} for q, p in items]},
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ScorerError(str(exc)) from exc
        if resp.status_code != 200:
            raise ScorerError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        scores = resp.json().get("scores")
        if not isinstance(scores, list) or len(scores) != len(items):
            raise ScorerError("score count does not match item count")
        return [float(s) for s in scores]


@dataclass
class Triple:
    triple_id: str
    pair_id: str
    query: str
    target: str
    positive_id: str
    negative_id: str
    score_pos: float | None
    score_neg: float | None
    margin: float | None
    valid: bool
    rejection_reason: str | None = None

    def to_record(self) -> dict:
        return {
            "triple_id": self.triple_id,
            "pair_id": self.pair_id,
            "query": self.query,
            "target": self.target,
            "positive_id": self.positive_id,
            "negative_id": self.negative_id,
            "score_pos": self.score_pos,
            "score_neg": self.score_neg,
            "margin": self.margin,
            "valid": self.valid,
            "rejection_reason": self.rejection_reason,
        }


@dataclass
class ValidationStats:
    generated: int = 0
    valid: int = 0
    rejected_margin: int = 0
    rejected_inverted: int = 0
    scorer_errors: int = 0
    fanout: dict[str, int] = field(default_factory=dict)
    pair_count: int = 0

    @property
    def triples_per_pair(self) -> float:
        return self.valid / self.pair_count if self.pair_count else 0.0

    def as_dict(self) -> dict:
        return {
            "generated": self.generated,
            "valid": self.valid,
            "rejected_margin": self.rejected_margin,
            "rejected_inverted": self.rejected_inverted,
            "scorer_errors": self.scorer_errors,
            "pair_count": self.pair_count,
            "triples_per_pair": self.triples_per_pair,
            "fanout": self.fanout,
        }


def validate(
    queries: Sequence[GeneratedQuery],
    pairs: Mapping[str, PassagePair],
    scorer: RelevanceScorer,
    tau: float = DEFAULT_TAU,
    pair_texts: Mapping[str, tuple[str, str]] | None = None,
) -> tuple[list[Triple], ValidationStats]:
    """Score every query against both passages of its pair and filter.

    For target B the roles swap: the pair's negative is the triple's
    positive. `pair_texts` supplies the passage texts exactly as prompted
    (possibly truncated); without it the stored passage texts are scored.
    Scorer failures reject the triple, never the run. Unknown pair_ids are
    a data-integrity error and fatal.
    """
    if tau <= 0.0:
        raise ValueError("tau must be > 0 (at 0, inverted pairs would pass)")
    stats = ValidationStats()
    triples: list[Triple] = []
    per_pair_ordinal: dict[str, int] = {}
    for q in queries:
        pair = pairs.get(q.pair_id)
        if pair is None:
            raise KeyError(f"query references unknown pair_id {q.pair_id!r}")
        ordinal = per_pair_ordinal.get(q.pair_id, 0)
        per_pair_ordinal[q.pair_id] = ordinal + 1
        if pair_texts and q.pair_id in pair_texts:
            first_text, second_text = pair_texts[q.pair_id]
        else:
            first_text, second_text = pair.positive.text, pair.negative.text
        if q.target == "A":
            pos_id, neg_id = pair.positive.passage_id, pair.negative.passage_id
            pos_text, neg_text = first_text, second_text
        else:
            pos_id, neg_id = pair.negative.passage_id, pair.positive.passage_id
            pos_text, neg_text = second_text, first_text
        stats.generated += 1
        triple_id = f"{q.pair_id}:q{ordinal:02d}"
        try:
            s_pos = float(scorer.score(q.text, pos_text))
            s_neg = float(scorer.score(q.text, neg_text))
            m = margin(s_pos, s_neg)
        except (ScorerError, ValueError, TypeError):
            stats.scorer_errors += 1
            triples.append(
                Triple(triple_id, q.pair_id, q.text, q.target, pos_id, neg_id,
                       None, None, None, valid=False, rejection_reason=REJECT_SCORER)
            )
            continue
        if m > tau:
            stats.valid += 1
            stats.fanout[q.pair_id] = stats.fanout.get(q.pair_id, 0) + 1
            triples.append(
                Triple(triple_id, q.pair_id, q.text, q.target, pos_id, neg_id,
                       s_pos, s_neg, m, valid=True)
            )
        else:
            reason = REJECT_INVERTED if m < 0.0 else REJECT_MARGIN
            if m < 0.0:
                stats.rejected_inverted += 1
            else:
                stats.rejected_margin += 1
            triples.append(
                Triple(triple_id, q.pair_id, q.text, q.target, pos_id, neg_id,
                       s_pos, s_neg, m, valid=False, rejection_reason=reason)
            )
    stats.pair_count = len(per_pair_ordinal)
    return triples, stats
