"""Case documents, label vocabularies, embedding sources and feature scaling.

Corpus files are JSON lines, one record per case:

    {"id": "...", "tokens": ["..."], "labels": [3, 17]}
    {"id": "...", "text": "raw text ...", "labels": [0]}

When ``text`` is given instead of ``tokens`` it is lowercased and split on
whitespace.  Multi-label records carry label indices; binary records carry
``[0]`` or ``[1]``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from . import tensorfile

log = logging.getLogger(__name__)

TASK_MULTILABEL = "multilabel"
TASK_BINARY = "binary"

STD_FLOOR = 1e-8


class CorpusError(Exception):
    """Malformed corpus record or label outside the vocabulary."""


@dataclass
class CaseDocument:
    id: str
    tokens: list[str]
    labels: frozenset[int]

    def label_vector(self, num_labels: int) -> np.ndarray:
        y = np.zeros(num_labels, dtype=np.float64)
        for j in self.labels:
            if not 0 <= j < num_labels:
                raise ValueError(f"document {self.id!r}: label {j} outside vocabulary of size {num_labels}")
            y[j] = 1.0
        return y


@dataclass
class LabelVocabulary:
    names: list[str]

    @property
    def size(self) -> int:
        return len(self.names)

    @classmethod
    def numbered(cls, size: int) -> "LabelVocabulary":
        return cls([f"L{i:03d}" for i in range(size)])


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def load_corpus(
    path: str,
    task: str,
    num_labels: int | None = None,
    label_names: list[str] | None = None,
) -> tuple[list[CaseDocument], LabelVocabulary]:
    """Load documents in file order and validate labels against the vocabulary.

    For the multi-label task the vocabulary size comes from ``label_names``,
    ``num_labels`` or, failing both, the maximum index seen.  The binary task
    always has a single output bit.
    """
    if task not in (TASK_MULTILABEL, TASK_BINARY):
        raise ValueError(f"unknown task {task!r}")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusError(f"{path}:{lineno}: invalid record: {err}") from err
            records.append((lineno, rec))

    docs = []
    max_label = -1
    for lineno, rec in records:
        try:
            doc_id = str(rec["id"])
            labels = [int(x) for x in rec["labels"]]
            tokens = [str(t) for t in rec["tokens"]] if "tokens" in rec else tokenize(str(rec["text"]))
        except (KeyError, TypeError, ValueError) as err:
            raise CorpusError(f"{path}:{lineno}: invalid record: {err}") from err
        if not tokens:
            raise CorpusError(f"{path}:{lineno}: document {doc_id!r} has no tokens")
        if task == TASK_BINARY:
            if len(labels) != 1 or labels[0] not in (0, 1):
                raise CorpusError(f"{path}:{lineno}: document {doc_id!r} needs a single 0/1 label")
            docs.append(CaseDocument(doc_id, tokens, frozenset([0]) if labels[0] else frozenset()))
            continue
        if any(j < 0 for j in labels):
            raise CorpusError(f"{path}:{lineno}: document {doc_id!r} has a negative label index")
        max_label = max(max_label, max(labels, default=-1))
        docs.append(CaseDocument(doc_id, tokens, frozenset(labels)))

    if task == TASK_BINARY:
        vocab = LabelVocabulary(label_names or ["accepted"])
        if vocab.size != 1:
            raise ValueError("binary task uses a single output label")
        return docs, vocab

    if label_names is not None:
        vocab = LabelVocabulary(list(label_names))
    else:
        vocab = LabelVocabulary.numbered(num_labels if num_labels is not None else max_label + 1)
    if num_labels is not None and vocab.size != num_labels:
        raise ValueError(f"label_names has {vocab.size} entries, expected {num_labels}")
    for doc, (lineno, _) in zip(docs, records):
        for j in doc.labels:
            if j >= vocab.size:
                raise CorpusError(
                    f"{path}:{lineno}: document {doc.id!r} label {j} outside vocabulary of size {vocab.size}"
                )
    return docs, vocab


def save_corpus(path: str, docs: list[CaseDocument], task: str = TASK_MULTILABEL) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            if task == TASK_BINARY:
                labels = [1 if 0 in doc.labels else 0]
            else:
                labels = sorted(doc.labels)
            fh.write(json.dumps({"id": doc.id, "tokens": doc.tokens, "labels": labels}) + "\n")


# ---------------------------------------------------------------------------
# Feature scaling

@dataclass
class FeatureScaler:
    """Per-dimension standardization fitted on training-split embeddings only."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


def fit_scaler(vectors: np.ndarray) -> FeatureScaler:
    """Population mean/std per dimension; std floored at 1e-8."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 2:
        raise ValueError("scaler fitting needs at least 2 vectors")
    mean = vectors.mean(axis=0)
    std = vectors.std(axis=0)  # population (ddof=0)
    floored = std < STD_FLOOR
    if floored.any():
        log.warning("scaler: %d dimension(s) have ~zero variance, flooring std", int(floored.sum()))
        std = np.where(floored, STD_FLOOR, std)
    return FeatureScaler(mean=mean, std=std)


def save_scaler(path: str, scaler: FeatureScaler) -> None:
    tensorfile.write_entries(
        path,
        scaler.mean.shape[0],
        [("scaler.mean", 0, scaler.mean.reshape(1, -1)), ("scaler.std", 0, scaler.std.reshape(1, -1))],
    )


def load_scaler(path: str) -> FeatureScaler:
    _, entries = tensorfile.read_entries(path)
    by_id = {entry_id: mat for entry_id, _, mat in entries}
    return FeatureScaler(
        mean=np.asarray(by_id["scaler.mean"][0], dtype=np.float64),
        std=np.asarray(by_id["scaler.std"][0], dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# Embedding sources

STATIC = "static-lookup"
PRECOMPUTED = "precomputed-contextual"


class StaticVectors:
    """Word-vector lookup table; out-of-vocabulary tokens map to the zero vector."""

    kind = STATIC

    def __init__(self, table: dict[str, np.ndarray], dimension: int, scaler: FeatureScaler | None = None):
        self.table = {tok: np.asarray(v, dtype=np.float64) for tok, v in table.items()}
        self.dimension = dimension
        self.scaler = scaler
        self._oov = np.zeros(dimension, dtype=np.float64)
        for tok, vec in self.table.items():
            if vec.shape != (dimension,):
                raise ValueError(f"vector for {tok!r} has shape {vec.shape}, expected ({dimension},)")

    @classmethod
    def load(cls, path: str, scaler: FeatureScaler | None = None) -> "StaticVectors":
        """Read the text convention: header "<count> <dim>", then one token per line."""
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise CorpusError(f"{path}: header must be '<count> <dim>'")
            count, dim = int(header[0]), int(header[1])
            table = {}
            for lineno, line in enumerate(fh, start=2):
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise CorpusError(f"{path}:{lineno}: expected token plus {dim} floats")
                table[parts[0]] = np.array([float(x) for x in parts[1:]], dtype=np.float64)
        if len(table) != count:
            raise CorpusError(f"{path}: header declares {count} vectors, found {len(table)}")
        return cls(table, dim, scaler)

    def lookup(self, token: str) -> np.ndarray:
        return self.table.get(token, self._oov)

    def token_matrix(self, tokens: list[str]) -> np.ndarray:
        return np.stack([self.lookup(t) for t in tokens])


def save_static_vectors(path: str, table: dict[str, np.ndarray], dimension: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table)} {dimension}\n")
        for tok, vec in table.items():
            fh.write(tok + " " + " ".join(repr(float(x)) for x in vec) + "\n")


class PrecomputedTensors:
    """Per-(document, chunk) embedding matrices read from a tensor container."""

    kind = PRECOMPUTED

    def __init__(self, path: str, scaler: FeatureScaler | None = None, expected_dim: int | None = None):
        self.path = path
        dimension, entries = tensorfile.read_entries(path)
        if expected_dim is not None and dimension != expected_dim:
            raise CorpusError(f"{path}: file dimension {dimension} != configured {expected_dim}")
        self.dimension = dimension
        self.scaler = scaler
        self._entries: dict[tuple[str, int], np.ndarray] = {}
        for entry_id, chunk_index, mat in entries:
            self._entries[(entry_id, chunk_index)] = np.asarray(mat, dtype=np.float64)

    def get(self, doc_id: str, chunk_index: int) -> np.ndarray:
        key = (doc_id, chunk_index)
        if key not in self._entries:
            raise CorpusError(f"{self.path}: no tensor for document {doc_id!r} chunk {chunk_index}")
        return self._entries[key]

    def chunk_count(self, doc_id: str) -> int:
        return sum(1 for key in self._entries if key[0] == doc_id)

    def all_rows(self, doc_ids: list[str] | None = None) -> np.ndarray:
        wanted = None if doc_ids is None else set(doc_ids)
        mats = [m for (doc_id, _), m in self._entries.items() if wanted is None or doc_id in wanted]
        return np.concatenate(mats, axis=0)


def embed_chunk(
    source,
    doc_id: str,
    chunk: list[str],
    chunk_index: int,
    sentinel: np.ndarray | None = None,
) -> np.ndarray:
    """Embedding matrix for one chunk, delimiter (CLS-role) vector as row 0.

    Static sources return (len(chunk)+1, d): the sentinel row followed by one
    row per token.  Precomputed sources return the stored matrix, whose row 0
    is the encoder's own first-position vector.  Rows pass through the
    source's fitted scaler when one is attached.
    """
    if not chunk:
        raise ValueError("chunk must be non-empty")
    if source.kind == STATIC:
        head = np.zeros(source.dimension, dtype=np.float64) if sentinel is None else np.asarray(sentinel, dtype=np.float64)
        mat = np.vstack([head.reshape(1, -1), source.token_matrix(chunk)])
    else:
        mat = source.get(doc_id, chunk_index)
    if source.scaler is not None:
        mat = source.scaler.transform(mat)
    return mat
