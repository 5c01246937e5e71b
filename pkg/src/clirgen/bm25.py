"""Inverted index over passages with Okapi BM25 scoring."""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import Passage
from .text import tokens

INDEX_FORMAT = "clirgen-bm25"
INDEX_VERSION = 1

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4


@dataclass(frozen=True)
class AnalyzerConfig:
    tokenizer: str = "mixed-cjk-v1"
    fold_case: bool = True


@dataclass(frozen=True)
class ScoredHit:
    passage_id: str
    score: float
    rank: int


class IndexedCorpus:
    """Immutable after build; shareable across concurrent searchers."""

    def __init__(
        self,
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
        analyzer: AnalyzerConfig = AnalyzerConfig(),
    ):
        self.k1 = k1
        self.b = b
        self.analyzer = analyzer
        self.postings: dict[str, dict[str, int]] = {}
        self.doc_lengths: dict[str, int] = {}
        self.avg_doc_len: float = 0.0

    @property
    def passage_count(self) -> int:
        return len(self.doc_lengths)

    def analyze(self, text: str) -> list[str]:
        return tokens(text, fold_case=self.analyzer.fold_case)


def build_index(
    passages: Iterable[Passage],
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    analyzer: AnalyzerConfig = AnalyzerConfig(),
) -> IndexedCorpus:
    index = IndexedCorpus(k1=k1, b=b, analyzer=analyzer)
    for p in passages:
        if p.passage_id in index.doc_lengths:
            raise ValueError(f"duplicate passage_id {p.passage_id!r}")
        terms = index.analyze(p.text)
        index.doc_lengths[p.passage_id] = len(terms)
        for term, tf in Counter(terms).items():
            index.postings.setdefault(term, {})[p.passage_id] = tf
    if index.doc_lengths:
        index.avg_doc_len = sum(index.doc_lengths.values()) / len(index.doc_lengths)
    return index


def _idf(n_passages: int, df: int) -> float:
    # Floored variant: never negative, so mining's score ratios stay in [0, inf).
    return max(0.0, math.log((n_passages - df + 0.5) / (df + 0.5) + 1.0))


def search(index: IndexedCorpus, query_text: str, k: int) -> list[ScoredHit]:
    """Top-k passages by BM25. Only passages matching at least one query
    term are returned; ties break on ascending passage_id. Query terms are
    folded and deduplicated with a frequency multiplier, and accumulation
    runs in sorted term order so scores are permutation-invariant."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = Counter(index.analyze(query_text))
    if not q or not index.doc_lengths:
        return []
    n = index.passage_count
    scores: dict[str, float] = {}
    for term in sorted(q):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = _idf(n, len(plist))
        qtf = q[term]
        for pid, tf in plist.items():
            dl = index.doc_lengths[pid]
            denom = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avg_doc_len)
            scores[pid] = scores.get(pid, 0.0) + qtf * idf * tf * (index.k1 + 1.0) / denom
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return [ScoredHit(pid, sc, i + 1) for i, (pid, sc) in enumerate(ranked)]


def score_one(index: IndexedCorpus, query_text: str, passage_id: str) -> float:
    """BM25 score of a single passage for a query (0.0 if no term matches)."""
    if passage_id not in index.doc_lengths:
        raise KeyError(passage_id)
    q = Counter(index.analyze(query_text))
    n = index.passage_count
    dl = index.doc_lengths[passage_id]
    score = 0.0
    for term in sorted(q):
        plist = index.postings.get(term)
        if not plist:
            continue
        tf = plist.get(passage_id)
        if not tf:
            continue
        idf = _idf(n, len(plist))
        denom = tf + index.k1 * (1.0 - index.b + index.b * dl / index.avg_doc_len)
        score += q[term] * idf * tf * (index.k1 + 1.0) / denom
    return score


def save_index(index: IndexedCorpus, path: str | Path) -> None:
    """Line format: a self-describing header, one length record per passage,
    then one postings record per term (sorted), all JSON."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        header = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "analyzer": {
                "tokenizer": index.analyzer.tokenizer,
                "fold_case": index.analyzer.fold_case,
            },
            "k1": index.k1,
            "b": index.b,
            "passage_count": index.passage_count,
            "avg_doc_len": index.avg_doc_len,
        }
        f.write(json.dumps(header, ensure_ascii=False) + "\n")
        for pid, dl in index.doc_lengths.items():
            f.write(json.dumps({"d": pid, "len": dl}, ensure_ascii=False) + "\n")
        for term in sorted(index.postings):
            rec = {"t": term, "p": list(index.postings[term].items())}
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_index(path: str | Path) -> IndexedCorpus:
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        header = json.loads(f.readline())
        if header.get("format") != INDEX_FORMAT:
            raise ValueError(f"{path}: not a {INDEX_FORMAT} file")
        analyzer = AnalyzerConfig(
            tokenizer=header["analyzer"]["tokenizer"],
            fold_case=header["analyzer"]["fold_case"],
        )
        index = IndexedCorpus(k1=header["k1"], b=header["b"], analyzer=analyzer)
        for line in f:
            rec = json.loads(line)
            if "d" in rec:
                index.doc_lengths[rec["d"]] = rec["len"]
            else:
                index.postings[rec["t"]] = {pid: tf for pid, tf in rec["p"]}
        index.avg_doc_len = header["avg_doc_len"]
        if index.passage_count != header["passage_count"]:
            raise ValueError(f"{path}: passage count mismatch")
    return index
