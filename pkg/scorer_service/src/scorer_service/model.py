"""Scoring model wrappers.

Scores are raw logits, never probabilities: the consumer applies its own
two-way softmax over (positive, negative) score pairs, and normalizing
twice would squash the margins it thresholds on.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Protocol, Sequence

DEFAULT_MODEL_ID = "cross-encoder/mmarco-mMiniLMv2-L12-H384-v1"


class ScoringModel(Protocol):
    model_id: str
    version: str

    def score_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]: ...


class CrossEncoderModel:
    """Multilingual cross-encoder via sentence-transformers, in eval mode
    with gradients off so identical requests score identically."""

    def __init__(self, model_id: str = DEFAULT_MODEL_ID, device: str = "cpu"):
        import torch
        from sentence_transformers import CrossEncoder

        self.model_id = model_id
        self._encoder = CrossEncoder(model_id, device=device)
        self._encoder.model.eval()
        torch.set_grad_enabled(False)
        self._identity = torch.nn.Identity()
        try:
            import sentence_transformers

            self.version = f"sentence-transformers/{sentence_transformers.__version__}"
        except Exception:
            self.version = "unknown"

    def score_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        scores = self._encoder.predict(
            [list(p) for p in pairs],
            activation_fct=self._identity,  # raw logits
            convert_to_numpy=True,
            show_progress_bar=False,
        )
        return [float(s) for s in scores]


@dataclass
class HashStubModel:
    """Deterministic stand-in for tests and offline development.

    The score is a stable function of the (query, passage) bytes - useful
    for exercising the HTTP contract (ordering, determinism, batching),
    meaningless as relevance.
    """

    model_id: str = "stub/deterministic-hash"
    version: str = "1"

    def score_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        out = []
        for query, passage in pairs:
            digest = hashlib.sha256(f"{query}\x00{passage}".encode("utf-8")).digest()
            raw = int.from_bytes(digest[:8], "big") / 2**64  # [0, 1)
            out.append(raw * 16.0 - 8.0)  # logit-ish range
        return out


def load_model_from_env() -> ScoringModel:
    """SCORER_MODEL selects the model; the value "stub" loads the hash stub."""
    model_id = os.environ.get("SCORER_MODEL", DEFAULT_MODEL_ID)
    if model_id == "stub":
        return HashStubModel()
    return CrossEncoderModel(model_id)
