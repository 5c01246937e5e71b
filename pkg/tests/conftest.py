from __future__ import annotations

from pathlib import Path

import pytest

from clirgen.corpus import Passage

DATA = Path(__file__).parent / "data"

TOY_PASSAGES = [
    Passage("P1", "D1", 0, "volcano erupts ash", 18, 3),
    Passage("P2", "D2", 0, "volcano tourism guide", 21, 3),
    Passage("P3", "D3", 0, "stock market falls", 18, 3),
]


@pytest.fixture
def toy_passages():
    return list(TOY_PASSAGES)


@pytest.fixture
def toy_index(toy_passages):
    from clirgen.bm25 import build_index

    return build_index(toy_passages, k1=0.9, b=0.4)


def make_passage(pid: str, doc_id: str, text: str) -> Passage:
    from clirgen.text import tokens

    return Passage(pid, doc_id, 0, text, len(text), len(tokens(text)))
