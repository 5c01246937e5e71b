"""Positive/negative passage pair selection.

Two regimens:

* news - a random length-qualifying passage becomes the positive and is
  issued verbatim as a BM25 query; the negative is the first ranked hit
  that is long enough, scores below the ratio threshold, and belongs to a
  document with no passage at or above the threshold. The positive's own
  document is always excluded.
* tweet - externally supplied seed queries pick positives; negatives must
  appear in both the seed query's and the positive's result lists, pass a
  longest-common-substring gate on both sides (retweets otherwise flood
  the pairs with near-duplicates), and each passage is used at most once.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .bm25 import IndexedCorpus, ScoredHit, score_one, search
from .corpus import Passage
from .lcs import longest_common_substring

log = logging.getLogger(__name__)

# Per-language minimum passage lengths (unicode code points), per regimen.
MIN_PASSAGE_CHARS = {
    "news": {"zho": 75, "fas": 100, "rus": 200},
    "tweet": {"zho": 15, "fas": 25},
}
RATIO_THRESHOLDS = {"news": 0.65, "tweet": 0.8}


@dataclass
class PairingConfig:
    mode: str  # "news" | "tweet"
    min_passage_chars: int
    ratio_threshold: float
    candidate_pool_size: int = 1000
    lcs_min_outside_chars: int = 20
    lcs_min_outside_frac: float = 0.40
    exclude_same_document: bool = True
    unique_pairing: bool = False

    def __post_init__(self):
        if self.mode not in ("news", "tweet"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 < self.ratio_threshold < 1.0:
            raise ValueError("ratio_threshold must be in (0, 1)")
        if self.min_passage_chars < 1:
            raise ValueError("min_passage_chars must be >= 1")
        if self.candidate_pool_size < 1:
            raise ValueError("candidate_pool_size must be >= 1")


def default_config(mode: str, lang: str | None = None, **overrides) -> PairingConfig:
    """Config with the documented defaults for a regimen and language."""
    mins = MIN_PASSAGE_CHARS.get(mode, {})
    params = {
        "mode": mode,
        "min_passage_chars": mins.get(lang, 25 if mode == "tweet" else 100),
        "ratio_threshold": RATIO_THRESHOLDS[mode],
        "exclude_same_document": mode == "news",
        "unique_pairing": mode == "tweet",
    }
    params.update(overrides)
    return PairingConfig(**params)


@dataclass
class PassagePair:
    pair_id: str
    positive: Passage
    negative: Passage
    positive_self_score: float
    negative_score: float
    score_ratio: float
    lcs_len: int | None = None
    seed_query_id: str | None = None

    def to_record(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "positive_id": self.positive.passage_id,
            "negative_id": self.negative.passage_id,
            "positive_self_score": self.positive_self_score,
            "negative_score": self.negative_score,
            "score_ratio": self.score_ratio,
            "lcs_len": self.lcs_len,
            "seed_query_id": self.seed_query_id,
        }


def pair_from_record(rec: dict, passages: Mapping[str, Passage]) -> PassagePair:
    return PassagePair(
        pair_id=rec["pair_id"],
        positive=passages[rec["positive_id"]],
        negative=passages[rec["negative_id"]],
        positive_self_score=float(rec["positive_self_score"]),
        negative_score=float(rec["negative_score"]),
        score_ratio=float(rec["score_ratio"]),
        lcs_len=rec.get("lcs_len"),
        seed_query_id=rec.get("seed_query_id"),
    )


@dataclass(frozen=True)
class NoPair:
    reason: str  # "no_qualifying_positive" | "zero_self_score" | "no_negative"


@dataclass
class MiningStats:
    attempts: int = 0
    emitted: int = 0
    zero_self_score: int = 0
    no_negative: int = 0
    no_retrieval: int = 0
    no_positive: int = 0
    seeds_total: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _passes_lcs_gate(char_len: int, lcs_len: int, cfg: PairingConfig) -> bool:
    outside = char_len - lcs_len
    return outside >= cfg.lcs_min_outside_chars and outside / char_len >= cfg.lcs_min_outside_frac


def select_news_negative(
    hits: Sequence[ScoredHit],
    positive: Passage,
    self_score: float,
    passages: Mapping[str, Passage],
    cfg: PairingConfig,
) -> tuple[Passage, float, float] | None:
    """Walk the ranked list for the first qualifying negative.

    A document is disqualified outright if any of its retrieved passages
    scored at or above the ratio threshold; unretrieved passages count as
    ratio 0. Returns (negative, score, ratio) or None.
    """
    banned_docs = {positive.doc_id}
    for h in hits:
        if h.score / self_score >= cfg.ratio_threshold:
            banned_docs.add(passages[h.passage_id].doc_id)
    for h in hits:
        cand = passages[h.passage_id]
        if cand.doc_id in banned_docs:
            continue
        if cand.char_len < cfg.min_passage_chars:
            continue
        ratio = h.score / self_score
        if ratio >= cfg.ratio_threshold:
            continue
        return cand, h.score, ratio
    return None


def mine_news_pair(
    index: IndexedCorpus,
    passages: Mapping[str, Passage],
    rng: random.Random,
    cfg: PairingConfig,
    qualifying: Sequence[str] | None = None,
) -> PassagePair | NoPair:
    """One seeded draw: random qualifying positive, ranked-list negative.

    Returns a NoPair with its reason when the draw yields nothing
    (degenerate positive or no qualifying negative); the caller retries
    with a fresh draw.
    """
    if cfg.mode != "news":
        raise ValueError("mine_news_pair requires a news-mode config")
    if not index.doc_lengths:
        raise ValueError("index is empty")
    if qualifying is None:
        qualifying = sorted(
            pid for pid, p in passages.items() if p.char_len >= cfg.min_passage_chars
        )
    if not qualifying:
        return NoPair("no_qualifying_positive")
    positive = passages[qualifying[rng.randrange(len(qualifying))]]
    self_score = score_one(index, positive.text, positive.passage_id)
    if self_score <= 0.0:
        return NoPair("zero_self_score")
    hits = search(index, positive.text, cfg.candidate_pool_size)
    found = select_news_negative(hits, positive, self_score, passages, cfg)
    if found is None:
        return NoPair("no_negative")
    negative, neg_score, ratio = found
    return PassagePair(
        pair_id="",
        positive=positive,
        negative=negative,
        positive_self_score=self_score,
        negative_score=neg_score,
        score_ratio=ratio,
    )


def mine_news_pairs(
    index: IndexedCorpus,
    passages: Mapping[str, Passage],
    count: int,
    rng_seed: int,
    cfg: PairingConfig,
    max_attempts: int | None = None,
) -> tuple[list[PassagePair], MiningStats]:
    """Draw until `count` pairs are emitted or attempts run out. Fully
    reproducible for a fixed (seed, corpus, config)."""
    rng = random.Random(rng_seed)
    stats = MiningStats()
    if max_attempts is None:
        max_attempts = max(count * 20, 100)
    qualifying = sorted(
        pid for pid, p in passages.items() if p.char_len >= cfg.min_passage_chars
    )
    pairs: list[PassagePair] = []
    while len(pairs) < count and stats.attempts < max_attempts:
        stats.attempts += 1
        pair = mine_news_pair(index, passages, rng, cfg, qualifying=qualifying)
        if isinstance(pair, NoPair):
            if pair.reason == "zero_self_score":
                stats.zero_self_score += 1
            else:
                stats.no_negative += 1
            if pair.reason == "no_qualifying_positive":
                break
            continue
        pair.pair_id = f"pair-{len(pairs):06d}"
        pairs.append(pair)
        stats.emitted += 1
    if len(pairs) < count:
        log.warning("mined %d/%d pairs after %d attempts", len(pairs), count, stats.attempts)
    return pairs, stats


def mine_tweet_pairs(
    index: IndexedCorpus,
    passages: Mapping[str, Passage],
    seed_queries: Sequence[tuple[str, str]],
    cfg: PairingConfig,
) -> tuple[list[PassagePair], MiningStats]:
    """One pass over the seed queries; at most one pair per seed.

    The positive is the first unused, length-qualifying hit for the seed
    query. The negative is the first hit of the positive-as-query ranking
    that also appeared in the seed ranking, is unused and long enough,
    scores under the ratio threshold, and leaves both passages with enough
    text outside their longest common substring. Uniqueness bookkeeping is
    a single shared set, so parallel callers must serialize here.
    """
    if cfg.mode != "tweet":
        raise ValueError("mine_tweet_pairs requires a tweet-mode config")
    if not seed_queries:
        raise ValueError("seed_queries must be non-empty")
    stats = MiningStats(seeds_total=len(seed_queries))
    used: set[str] = set()
    pairs: list[PassagePair] = []
    for seed_id, seed_text in seed_queries:
        seed_hits = search(index, seed_text, cfg.candidate_pool_size)
        if not seed_hits:
            stats.no_retrieval += 1
            continue
        seed_pids = {h.passage_id for h in seed_hits}
        positive = None
        for h in seed_hits:
            p = passages[h.passage_id]
            if p.char_len >= cfg.min_passage_chars and p.passage_id not in used:
                positive = p
                break
        if positive is None:
            stats.no_positive += 1
            continue
        self_score = score_one(index, positive.text, positive.passage_id)
        if self_score <= 0.0:
            stats.no_positive += 1
            continue
        pos_hits = search(index, positive.text, cfg.candidate_pool_size)
        selected = None
        for h in pos_hits:
            if h.passage_id == positive.passage_id or h.passage_id in used:
                continue
            if h.passage_id not in seed_pids:
                continue
            cand = passages[h.passage_id]
            if cand.char_len < cfg.min_passage_chars:
                continue
            ratio = h.score / self_score
            if ratio >= cfg.ratio_threshold:
                continue
            lcs_len = longest_common_substring(positive.text, cand.text)
            if not _passes_lcs_gate(cand.char_len, lcs_len, cfg):
                continue
            if not _passes_lcs_gate(positive.char_len, lcs_len, cfg):
                continue
            selected = (cand, h.score, ratio, lcs_len)
            break
        if selected is None:
            stats.no_negative += 1
            continue
        negative, neg_score, ratio, lcs_len = selected
        used.add(positive.passage_id)
        used.add(negative.passage_id)
        pairs.append(
            PassagePair(
                pair_id=f"pair-{len(pairs):06d}",
                positive=positive,
                negative=negative,
                positive_self_score=self_score,
                negative_score=neg_score,
                score_ratio=ratio,
                lcs_len=lcs_len,
                seed_query_id=seed_id,
            )
        )
        stats.emitted += 1
    return pairs, stats
