"""Deterministic synthetic corpora for quickstarts and capability checks.

Two generators:

* ``separable_corpus`` -- short documents where label j is on exactly when
  marker token ``marker_j`` appears; any working pipeline overfits it fast.
* ``planted_corpus`` -- long documents (2,000 tokens by default) whose
  marker tokens sit at uniformly random positions, so a model that reads the
  whole document has the signal while a last-window model usually does not.
"""

from __future__ import annotations

import numpy as np

from .corpus import CaseDocument, LabelVocabulary, StaticVectors


def marker(j: int) -> str:
    return f"marker_{j}"


def _filler_pool(size: int) -> list[str]:
    return [f"filler_{i:03d}" for i in range(size)]


def separable_corpus(
    n_docs: int = 32,
    n_labels: int = 4,
    doc_len: tuple[int, int] = (20, 40),
    seed: int = 7,
    id_prefix: str = "case",
) -> tuple[list[CaseDocument], LabelVocabulary]:
    rng = np.random.default_rng(seed)
    fillers = _filler_pool(10)
    docs = []
    for i in range(n_docs):
        labels = frozenset(j for j in range(n_labels) if (i >> j) & 1 or rng.random() < 0.15)
        length = int(rng.integers(doc_len[0], doc_len[1] + 1))
        tokens = [fillers[int(rng.integers(len(fillers)))] for _ in range(length)]
        for j in sorted(labels):
            tokens[int(rng.integers(length))] = marker(j)
        # re-derive labels from what actually survived the overwrites
        present = frozenset(j for j in range(n_labels) if marker(j) in tokens)
        docs.append(CaseDocument(id=f"{id_prefix}{i:04d}", tokens=tokens, labels=present))
    return docs, LabelVocabulary.numbered(n_labels)


def planted_corpus(
    n_docs: int = 32,
    n_labels: int = 4,
    doc_len: int = 2000,
    seed: int = 11,
    id_prefix: str = "long",
    run_length: int = 6,
) -> tuple[list[CaseDocument], LabelVocabulary]:
    """Documents of ``doc_len`` filler tokens; each active label plants one
    run of ``run_length`` marker tokens starting at a uniform position."""
    rng = np.random.default_rng(seed)
    fillers = _filler_pool(50)
    docs = []
    for i in range(n_docs):
        tokens = [fillers[int(rng.integers(len(fillers)))] for _ in range(doc_len)]
        labels = frozenset(j for j in range(n_labels) if rng.random() < 0.5)
        # non-overlapping starts so no run erases another
        slots = rng.permutation(doc_len // run_length)[:n_labels] * run_length
        for j in sorted(labels):
            start = int(slots[j])
            tokens[start : start + run_length] = [marker(j)] * run_length
        docs.append(CaseDocument(id=f"{id_prefix}{i:04d}", tokens=tokens, labels=labels))
    return docs, LabelVocabulary.numbered(n_labels)


def random_vectors(
    n_labels: int,
    filler_count: int,
    dim: int = 16,
    seed: int = 13,
    marker_scale: float = 1.0,
) -> StaticVectors:
    """Seeded random embeddings covering every marker and filler token.

    ``marker_scale`` > 1 makes the planted signal tokens stand out from the
    filler distribution, the way salient phrases stand out in real text.
    """
    rng = np.random.default_rng(seed)
    table = {}
    for j in range(n_labels):
        table[marker(j)] = rng.normal(size=dim) * marker_scale
    for tok in _filler_pool(filler_count):
        table[tok] = rng.normal(size=dim)
    return StaticVectors(table, dim)
