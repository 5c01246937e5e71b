"""Document ingestion, per-genre normalization, and sliding-window segmentation."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Iterator

from .text import strip_urls, tokenize_with_spans

log = logging.getLogger(__name__)

GENRES = ("news", "tweet_thread")

DEFAULT_WINDOW_TOKENS = 180
DEFAULT_STRIDE_TOKENS = 90


@dataclass
class Document:
    doc_id: str
    lang: str
    genre: str
    text: str
    title: str | None = None
    source_uri: str | None = None


@dataclass
class Passage:
    passage_id: str
    doc_id: str
    char_offset: int
    text: str
    char_len: int
    token_count: int


@dataclass
class CorpusStats:
    documents_read: int = 0
    documents_dropped: int = 0
    records_skipped: int = 0
    passages_emitted: int = 0
    urls_stripped: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def normalize(text: str, genre: str) -> tuple[str, int]:
    """Apply genre normalization. Tweets lose URLs (BM25 otherwise pairs
    passages on shared shortener tokens); all genres are trimmed of
    leading/trailing whitespace so passage offsets start at 0."""
    urls = 0
    if genre == "tweet_thread":
        text, urls = strip_urls(text)
    return text.strip(), urls


def ingest(
    lines: Iterable[str],
    genre: str,
    lang: str,
    stats: CorpusStats | None = None,
) -> Iterator[Document]:
    """Parse line-delimited JSON records {id, text, title?} into Documents.

    Malformed lines and records missing id/text are skipped and counted,
    never fatal. Documents whose text is empty after normalization are
    dropped and counted.
    """
    if genre not in GENRES:
        raise ValueError(f"unknown genre {genre!r}; expected one of {GENRES}")
    stats = stats if stats is not None else CorpusStats()
    for line in lines:
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            stats.records_skipped += 1
            continue
        if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
            stats.records_skipped += 1
            continue
        stats.documents_read += 1
        text, urls = normalize(str(rec["text"]), genre)
        stats.urls_stripped += urls
        if not text:
            stats.documents_dropped += 1
            continue
        yield Document(
            doc_id=str(rec["id"]),
            lang=lang,
            genre=genre,
            text=text,
            title=rec.get("title"),
            source_uri=rec.get("source_uri"),
        )


def segment(
    doc: Document,
    window_tokens: int = DEFAULT_WINDOW_TOKENS,
    stride_tokens: int = DEFAULT_STRIDE_TOKENS,
) -> list[Passage]:
    """Split a document into overlapping token windows.

    Windows advance by the stride; the final window may be short, and any
    window whose token span sits entirely inside the previous one is
    suppressed (no duplicate tail passages). Passage text is the exact
    substring of the document spanning the window's tokens.
    """
    if window_tokens <= 0:
        raise ValueError("window_tokens must be positive")
    if not 0 < stride_tokens <= window_tokens:
        raise ValueError("stride_tokens must be in (0, window_tokens]")
    toks = tokenize_with_spans(doc.text)
    n = len(toks)
    passages: list[Passage] = []
    s = 0
    ordinal = 0
    while s < n:
        e = min(s + window_tokens, n)
        start_char = toks[s].start
        end_char = toks[e - 1].end
        text = doc.text[start_char:end_char]
        passages.append(
            Passage(
                passage_id=f"{doc.doc_id}:{ordinal}",
                doc_id=doc.doc_id,
                char_offset=start_char,
                text=text,
                char_len=len(text),
                token_count=e - s,
            )
        )
        if e >= n:
            break
        s += stride_tokens
        ordinal += 1
    return passages


def passage_to_record(p: Passage) -> dict:
    return {
        "passage_id": p.passage_id,
        "doc_id": p.doc_id,
        "char_offset": p.char_offset,
        "text": p.text,
        "char_len": p.char_len,
        "token_count": p.token_count,
    }


def passage_from_record(rec: dict) -> Passage:
    return Passage(
        passage_id=rec["passage_id"],
        doc_id=rec["doc_id"],
        char_offset=int(rec["char_offset"]),
        text=rec["text"],
        char_len=int(rec["char_len"]),
        token_count=int(rec["token_count"]),
    )
