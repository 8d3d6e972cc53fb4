import json

import numpy as np
import pytest

from lexsem import corpus as C
from lexsem import tensorfile as tf


def _write(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


class TestLoadCorpus:
    def test_count_and_order_preserved(self, tmp_path):
        path = str(tmp_path / "c.jsonl")
        _write(path, [
            {"id": "a", "tokens": ["x", "y"], "labels": [0]},
            {"id": "b", "tokens": ["z"], "labels": [1, 2]},
            {"id": "c", "text": "Hello WORLD", "labels": []},
        ])
        docs, vocab = C.load_corpus(path, "multilabel", num_labels=3)
        assert [d.id for d in docs] == ["a", "b", "c"]
        assert docs[2].tokens == ["hello", "world"]
        assert vocab.size == 3

    def test_label_out_of_vocabulary_names_doc(self, tmp_path):
        path = str(tmp_path / "c.jsonl")
        _write(path, [{"id": "bad-doc", "tokens": ["x"], "labels": [100]}])
        with pytest.raises(C.CorpusError, match="bad-doc"):
            C.load_corpus(path, "multilabel", num_labels=100)

    def test_binary_labels(self, tmp_path):
        path = str(tmp_path / "c.jsonl")
        _write(path, [
            {"id": "a", "tokens": ["x"], "labels": [1]},
            {"id": "b", "tokens": ["y"], "labels": [0]},
        ])
        docs, vocab = C.load_corpus(path, "binary")
        assert vocab.size == 1
        assert docs[0].label_vector(1).tolist() == [1.0]
        assert docs[1].label_vector(1).tolist() == [0.0]

    def test_binary_rejects_multi(self, tmp_path):
        path = str(tmp_path / "c.jsonl")
        _write(path, [{"id": "a", "tokens": ["x"], "labels": [0, 1]}])
        with pytest.raises(C.CorpusError):
            C.load_corpus(path, "binary")

    def test_empty_tokens_rejected(self, tmp_path):
        path = str(tmp_path / "c.jsonl")
        _write(path, [{"id": "a", "tokens": [], "labels": [0]}])
        with pytest.raises(C.CorpusError, match="no tokens"):
            C.load_corpus(path, "multilabel", num_labels=1)

    def test_malformed_line_reports_number(self, tmp_path):
        path = str(tmp_path / "c.jsonl")
        with open(path, "w") as fh:
            fh.write('{"id": "a", "tokens": ["x"], "labels": [0]}\n')
            fh.write("{not json\n")
        with pytest.raises(C.CorpusError, match=":2:"):
            C.load_corpus(path, "multilabel", num_labels=1)

    def test_roundtrip(self, tmp_path):
        docs = [
            C.CaseDocument("a", ["some", "tokens"], frozenset({0, 2})),
            C.CaseDocument("b", ["more"], frozenset()),
        ]
        path = str(tmp_path / "c.jsonl")
        C.save_corpus(path, docs)
        back, _ = C.load_corpus(path, "multilabel", num_labels=3)
        assert back == docs


class TestScaler:
    def test_worked_example(self):
        scaler = C.fit_scaler(np.array([[0.0, 0.0], [2.0, 2.0]]))
        assert scaler.mean.tolist() == [1.0, 1.0]
        assert scaler.std.tolist() == [1.0, 1.0]

    def test_constant_dimension_floored(self):
        scaler = C.fit_scaler(np.array([[1.0, 0.0], [1.0, 2.0]]))
        assert scaler.std[0] == C.STD_FLOOR

    def test_single_vector_rejected(self):
        with pytest.raises(ValueError):
            C.fit_scaler(np.array([[1.0, 2.0]]))

    def test_transformed_stats(self, rng):
        data = rng.normal(loc=3.0, scale=2.5, size=(400, 6))
        scaler = C.fit_scaler(data)
        out = scaler.transform(data)
        assert np.abs(out.mean(axis=0)).max() < 1e-6
        assert np.abs(out.std(axis=0) - 1.0).max() < 1e-6

    def test_save_load(self, tmp_path, rng):
        scaler = C.fit_scaler(rng.normal(size=(10, 4)))
        path = str(tmp_path / "s.semt")
        C.save_scaler(path, scaler)
        back = C.load_scaler(path)
        # stored as float32, so compare at that precision
        assert np.array_equal(back.mean, scaler.mean.astype(np.float32).astype(np.float64))


class TestStaticVectors:
    def _vectors(self):
        return C.StaticVectors({"alpha": np.arange(3.0), "beta": np.ones(3)}, 3)

    def test_file_roundtrip(self, tmp_path):
        src = self._vectors()
        path = str(tmp_path / "v.txt")
        C.save_static_vectors(path, src.table, 3)
        back = C.StaticVectors.load(path)
        assert back.dimension == 3
        assert np.array_equal(back.lookup("alpha"), np.arange(3.0))

    def test_oov_is_zero_vector(self):
        assert self._vectors().lookup("missing").tolist() == [0.0, 0.0, 0.0]

    def test_header_mismatch_rejected(self, tmp_path):
        path = str(tmp_path / "v.txt")
        with open(path, "w") as fh:
            fh.write("2 3\nalpha 1 2 3\n")
        with pytest.raises(C.CorpusError):
            C.StaticVectors.load(path)

    def test_wrong_column_count_rejected(self, tmp_path):
        path = str(tmp_path / "v.txt")
        with open(path, "w") as fh:
            fh.write("1 3\nalpha 1 2\n")
        with pytest.raises(C.CorpusError):
            C.StaticVectors.load(path)


class TestEmbedChunk:
    def test_static_shape_with_sentinel_row(self):
        table = {f"t{i}": np.full(100, float(i)) for i in range(5)}
        src = C.StaticVectors(table, 100)
        mat = C.embed_chunk(src, "d", [f"t{i}" for i in range(5)], 0)
        assert mat.shape == (6, 100)
        assert np.all(mat[0] == 0.0)  # default sentinel placeholder

    def test_oov_row(self):
        src = C.StaticVectors({"a": np.ones(2)}, 2)
        mat = C.embed_chunk(src, "d", ["a", "nope"], 0)
        assert mat[2].tolist() == [0.0, 0.0]

    def test_identity_scaling(self):
        src = C.StaticVectors({"a": np.array([2.0, 3.0])}, 2,
                              scaler=C.FeatureScaler(np.zeros(2), np.ones(2)))
        mat = C.embed_chunk(src, "d", ["a"], 0, sentinel=np.array([5.0, 6.0]))
        assert mat[0].tolist() == [5.0, 6.0]
        assert mat[1].tolist() == [2.0, 3.0]

    def test_scaling_keeps_shape(self, rng):
        table = {"a": rng.normal(size=4), "b": rng.normal(size=4)}
        plain = C.StaticVectors(table, 4)
        scaled = C.StaticVectors(table, 4, scaler=C.FeatureScaler(np.ones(4), np.full(4, 2.0)))
        chunk = ["a", "b", "a"]
        assert C.embed_chunk(plain, "d", chunk, 0).shape == C.embed_chunk(scaled, "d", chunk, 0).shape

    def test_empty_chunk_rejected(self):
        src = C.StaticVectors({}, 2)
        with pytest.raises(ValueError):
            C.embed_chunk(src, "d", [], 0)


class TestPrecomputedTensors:
    def _file(self, tmp_path, rng):
        path = str(tmp_path / "emb.semt")
        tf.write_entries(path, 4, [
            ("doc1", 0, rng.normal(size=(6, 4)).astype(np.float32)),
            ("doc1", 1, rng.normal(size=(3, 4)).astype(np.float32)),
        ])
        return path

    def test_lookup(self, tmp_path, rng):
        src = C.PrecomputedTensors(self._file(tmp_path, rng))
        assert src.get("doc1", 0).shape == (6, 4)
        assert src.chunk_count("doc1") == 2

    def test_missing_tensor(self, tmp_path, rng):
        src = C.PrecomputedTensors(self._file(tmp_path, rng))
        with pytest.raises(C.CorpusError, match="doc2"):
            src.get("doc2", 0)

    def test_dimension_mismatch(self, tmp_path, rng):
        with pytest.raises(C.CorpusError):
            C.PrecomputedTensors(self._file(tmp_path, rng), expected_dim=7)

    def test_embed_chunk_returns_stored_rows(self, tmp_path, rng):
        src = C.PrecomputedTensors(self._file(tmp_path, rng))
        mat = C.embed_chunk(src, "doc1", ["x", "y"], 1)
        assert mat.shape == (3, 4)
