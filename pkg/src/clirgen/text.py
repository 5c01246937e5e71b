"""Tokenization shared by segmentation, indexing, and lexical scoring."""
from __future__ import annotations

import re
from dataclasses import dataclass

# Han/kana characters are one token each so windows stay meaningful in
# unsegmented scripts; everything else splits on whitespace.
_CJK_RANGES = "぀-ヿ㐀-䶿一-鿿豈-﫿"
_TOKEN_RE = re.compile(f"[{_CJK_RANGES}]|[^\\s{_CJK_RANGES}]+")

URL_RE = re.compile(r"https?://\S+|(?<![\w.])t\.co/\S+", re.IGNORECASE)
_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


def tokenize_with_spans(text: str) -> list[Token]:
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def tokens(text: str, fold_case: bool = False) -> list[str]:
    out = _TOKEN_RE.findall(text)
    if fold_case:
        out = [t.casefold() for t in out]
    return out


def is_cjk(ch: str) -> bool:
    return (
        "一" <= ch <= "鿿"
        or "㐀" <= ch <= "䶿"
        or "぀" <= ch <= "ヿ"
        or "豈" <= ch <= "﫿"
    )


def strip_urls(text: str) -> tuple[str, int]:
    """Remove http(s)/t.co URLs; collapse the leftover whitespace to single spaces.

    Returns the cleaned text and the number of URLs removed. Text without
    URLs is returned untouched.
    """
    stripped, n = URL_RE.subn(" ", text)
    if n:
        stripped = _WS_RE.sub(" ", stripped).strip()
    return stripped, n
