"""Fixed-size, contiguous, non-overlapping chunking of token sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class ChunkedDocument:
    doc_id: str
    chunk_size: int
    chunks: list[list[str]] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.chunks)

    def flatten(self) -> list[str]:
        return [tok for chunk in self.chunks for tok in chunk]


def chunk_tokens(tokens: list[str], chunk_size: int) -> list[list[str]]:
    """Split left to right into chunks of chunk_size; the last one may be shorter."""
    if chunk_size < 1:
        raise ValueError(f"chunk size must be >= 1, got {chunk_size}")
    if not tokens:
        raise ValueError("cannot chunk an empty token sequence")
    return [tokens[i : i + chunk_size] for i in range(0, len(tokens), chunk_size)]


def chunk_document(doc, chunk_size: int) -> ChunkedDocument:
    """Chunk a CaseDocument; k == ceil(n / chunk_size), concatenation is lossless."""
    chunks = chunk_tokens(doc.tokens, chunk_size)
    assert len(chunks) == math.ceil(len(doc.tokens) / chunk_size)
    return ChunkedDocument(doc_id=doc.id, chunk_size=chunk_size, chunks=chunks)


def last_window(tokens: list[str], chunk_size: int) -> list[str]:
    """The truncated-document baseline: keep only the final chunk_size tokens."""
    if not tokens:
        raise ValueError("cannot truncate an empty token sequence")
    return tokens[-chunk_size:]
