"""clirgen: build cross-language retrieval training triples from any corpus.

The pipeline mines topically-related passage pairs with BM25, prompts a
text-generation backend for English queries that discriminate between the
two passages, and keeps only triples whose relevance margin clears a
threshold.
"""

__version__ = "0.1.0"
