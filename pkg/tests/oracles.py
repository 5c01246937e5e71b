"""Independent reference implementations used only to check the library.

Everything here is written from the definitions, deliberately not sharing
code paths with the package: quadratic DP for longest common substring,
score-every-passage BM25, and the margin computed with raw exponentials.
"""
from __future__ import annotations

import math
import re
from collections import Counter

_WORD_OR_CJK = re.compile(
    r"[぀-ヿ㐀-䶿一-鿿豈-﫿]"
    r"|[^\s぀-ヿ㐀-䶿一-鿿豈-﫿]+"
)


def dp_longest_common_substring(a: str, b: str) -> int:
    """Classic O(len(a) * len(b)) dynamic program, two rows."""
    if not a or not b:
        return 0
    best = 0
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0] * (len(b) + 1)
        for j, cb in enumerate(b, start=1):
            if ca == cb:
                v = prev[j - 1] + 1
                cur[j] = v
                if v > best:
                    best = v
        prev = cur
    return best


def analyze(text: str) -> list[str]:
    return [t.casefold() for t in _WORD_OR_CJK.findall(text)]


def bm25_rank_all(
    passage_texts: dict[str, str], query: str, k1: float = 0.9, b: float = 0.4
) -> list[tuple[str, float]]:
    """Score every passage for the query; matched passages only, sorted by
    (-score, passage_id). Same formula as the contract: Okapi with
    idf = max(0, ln((N - df + 0.5) / (df + 0.5) + 1))."""
    tfs = {pid: Counter(analyze(t)) for pid, t in passage_texts.items()}
    lens = {pid: sum(tf.values()) for pid, tf in tfs.items()}
    n = len(tfs)
    if n == 0:
        return []
    avgdl = sum(lens.values()) / n
    df: Counter = Counter()
    for tf in tfs.values():
        for term in tf:
            df[term] += 1
    q = Counter(analyze(query))
    scored = []
    for pid, tf in tfs.items():
        s = 0.0
        for term in sorted(q):
            f = tf.get(term, 0)
            if not f:
                continue
            idf = max(0.0, math.log((n - df[term] + 0.5) / (df[term] + 0.5) + 1.0))
            denom = f + k1 * (1.0 - b + b * lens[pid] / avgdl)
            s += q[term] * idf * f * (k1 + 1.0) / denom
        if s > 0.0:
            scored.append((pid, s))
    scored.sort(key=lambda kv: (-kv[1], kv[0]))
    return scored


def direct_margin(a: float, b: float) -> float:
    """Eq. straight from the definition; only safe for moderate scores."""
    ea, eb = math.exp(a), math.exp(b)
    return ea / (ea + eb) - eb / (ea + eb)
