"""Glue between corpora, embedding sources and the model's chunk inputs."""

from __future__ import annotations

import numpy as np

from .chunking import chunk_tokens, last_window
from .corpus import PRECOMPUTED, STATIC, CaseDocument, fit_scaler


class EmbeddingPipeline:
    """Produces the per-chunk embedding matrices the model consumes.

    Static sources yield token-only matrices: the model prepends its learned
    sentinel row in-graph.  Precomputed sources yield the stored matrices,
    whose row 0 is the encoder's own first-position vector.
    """

    def __init__(self, source, chunk_size: int, truncate_to_last_chunk: bool = False):
        self.source = source
        self.chunk_size = chunk_size
        self.truncate_to_last_chunk = truncate_to_last_chunk

    def chunks_for(self, doc: CaseDocument) -> list[np.ndarray]:
        tokens = doc.tokens
        if self.truncate_to_last_chunk:
            if self.source.kind == PRECOMPUTED:
                raise ValueError("the last-window baseline needs a static source; "
                                 "precomputed tensors are keyed by full-document chunk indices")
            tokens = last_window(tokens, self.chunk_size)
        chunks = chunk_tokens(tokens, self.chunk_size)
        if self.source.kind == STATIC:
            mats = [self.source.token_matrix(c) for c in chunks]
        elif self.source.kind == PRECOMPUTED:
            mats = [self.source.get(doc.id, i) for i in range(len(chunks))]
        else:
            raise ValueError(f"unknown embedding source kind {self.source.kind!r}")
        if self.source.scaler is not None:
            mats = [self.source.scaler.transform(m) for m in mats]
        return mats


def fit_scaler_for(source, train_docs: list[CaseDocument], chunk_size: int):
    """Fit standardization statistics from the training split only."""
    if source.kind == STATIC:
        rows = [source.token_matrix(doc.tokens) for doc in train_docs]
        return fit_scaler(np.concatenate(rows, axis=0))
    return fit_scaler(source.all_rows([doc.id for doc in train_docs]))
