"""HTTP scoring service: cross-encoder relevance logits for query/passage pairs."""

__version__ = "0.1.0"
