import math

import numpy as np
import pytest

from lexsem import model as M
from lexsem import training as T
from lexsem.nn.autodiff import Tensor
from lexsem.synthetic import random_vectors, separable_corpus
from lexsem.pipeline import EmbeddingPipeline

from conftest import tiny_config


class TestLoss:
    def test_perfect_prediction_near_zero(self):
        out = T.loss(np.array([1.0]), Tensor(np.array([1.0 - 1e-12])))
        assert out.item() < 1e-11

    def test_worked_example_two_ln_two(self):
        out = T.loss(np.array([1.0, 0.0]), Tensor(np.array([0.5, 0.5])))
        assert abs(out.item() - 2.0 * math.log(2.0)) < 1e-12

    def test_weight_factor_is_linear(self, rng):
        gold = (rng.random(5) > 0.5).astype(float)
        probs = Tensor(rng.uniform(0.05, 0.95, size=5))
        assert abs(T.loss(gold, probs, 2.0).item() - 2.0 * T.loss(gold, probs, 1.0).item()) < 1e-12

    def test_one_sided_form_drops_negative_term(self):
        gold = np.array([1.0, 0.0])
        probs = Tensor(np.array([0.5, 0.9]))
        full = T.loss(gold, probs).item()
        one = T.loss(gold, probs, one_sided=True).item()
        assert abs(one - math.log(2.0)) < 1e-12
        assert full > one  # the (1-y)·log(1-p) penalty is extra

    def test_one_sided_is_minimized_by_all_ones(self):
        gold = np.array([1.0, 0.0, 1.0])
        confident = T.loss(gold, Tensor(np.array([1.0, 1.0, 1.0])), one_sided=True).item()
        calibrated = T.loss(gold, Tensor(np.array([0.9, 0.1, 0.9])), one_sided=True).item()
        assert confident < calibrated  # why the two-sided form is the default

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            T.loss(np.array([1.0]), Tensor(np.array([0.5, 0.5])))

    def test_clamping_keeps_loss_finite(self):
        out = T.loss(np.array([1.0, 0.0]), Tensor(np.array([0.0, 1.0])))
        assert np.isfinite(out.item())


def _scalar_param(value: float) -> dict[str, Tensor]:
    return {"head.W": Tensor(np.array([[value]]), requires_grad=True)}


class TestAdam:
    def _config(self, **kw):
        defaults = dict(l2=0.0, learning_rates={"head": 1e-3, "attention": 1e-4,
                                                "chunk_recurrent": 1e-4, "document_recurrent": 1e-4,
                                                "sentinel": 1e-4})
        defaults.update(kw)
        return T.TrainConfig(**defaults)

    def test_zero_gradient_leaves_params(self):
        params = _scalar_param(1.5)
        state = T.AdamState.for_params(params)
        T.adam_step(params, {"head.W": np.zeros((1, 1))}, state, self._config())
        assert params["head.W"].data[0, 0] == 1.5
        assert state.step == 1

    def test_first_step_is_minus_lr(self):
        params = _scalar_param(0.0)
        state = T.AdamState.for_params(params)
        config = self._config()
        T.adam_step(params, {"head.W": np.ones((1, 1))}, state, config)
        # bias-corrected m_hat = 1, v_hat = 1 -> update = -lr/(1+eps)
        expected = -config.rate_for("head") * 1.0 / (1.0 + config.eps)
        assert abs(params["head.W"].data[0, 0] - expected) < 1e-15

    def test_layer_groups_use_their_rates(self):
        params = {
            "head.W": Tensor(np.zeros((1, 1)), requires_grad=True),
            "attention.W": Tensor(np.zeros((1, 1)), requires_grad=True),
        }
        state = T.AdamState.for_params(params)
        config = self._config(learning_rates={"head": 1e-4, "attention": 1e-5,
                                              "chunk_recurrent": 1e-4, "document_recurrent": 1e-4,
                                              "sentinel": 1e-4})
        grads = {k: np.ones((1, 1)) for k in params}
        T.adam_step(params, grads, state, config)
        ratio = params["head.W"].data[0, 0] / params["attention.W"].data[0, 0]
        assert abs(ratio - 10.0) < 1e-9

    def test_nan_gradient_names_parameter(self):
        params = _scalar_param(0.0)
        state = T.AdamState.for_params(params)
        with pytest.raises(T.TrainingDiverged, match="head.W"):
            T.adam_step(params, {"head.W": np.array([[np.nan]])}, state, self._config())

    def test_untouched_params_have_no_drift(self):
        params = {
            "head.W": Tensor(np.full((1, 1), 2.0), requires_grad=True),
            "attention.W": Tensor(np.full((1, 1), 3.0), requires_grad=True),
        }
        state = T.AdamState.for_params(params)
        config = self._config(l2=0.5)
        T.adam_step(params, {"head.W": np.ones((1, 1))}, state, config)
        assert params["attention.W"].data[0, 0] == 3.0  # absent from grads: no L2 either

    def test_step_magnitude_bounds(self, rng):
        params = _scalar_param(0.0)
        state = T.AdamState.for_params(params)
        config = self._config()
        lr = config.rate_for("head")
        for step in range(200):
            before = params["head.W"].data[0, 0]
            T.adam_step(params, {"head.W": rng.normal(size=(1, 1))}, state, config)
            delta = abs(params["head.W"].data[0, 0] - before)
            assert delta <= lr / (1.0 - config.beta1) + 1e-12
            if step > 50:
                assert delta <= 1.01 * lr

    def test_l2_enters_as_gradient_term(self):
        params = _scalar_param(2.0)
        state = T.AdamState.for_params(params)
        T.adam_step(params, {"head.W": np.zeros((1, 1))}, state, self._config(l2=0.1))
        assert params["head.W"].data[0, 0] < 2.0  # decay pulled it down

    def test_gradient_clipping(self):
        config = self._config(grad_clip=1.0)
        params = _scalar_param(0.0)
        state = T.AdamState.for_params(params)
        T.adam_step(params, {"head.W": np.full((1, 1), 100.0)}, state, config)
        clipped = params["head.W"].data[0, 0]
        params2 = _scalar_param(0.0)
        state2 = T.AdamState.for_params(params2)
        T.adam_step(params2, {"head.W": np.full((1, 1), 1.0)}, state2, self._config())
        assert abs(clipped - params2["head.W"].data[0, 0] * (1e-3 / 1e-3)) < 1e-12

    def test_beta_bounds_validated(self):
        with pytest.raises(ValueError):
            T.TrainConfig(beta1=1.0)

    def test_pooling_rate_keys_warned_and_dropped(self, caplog):
        import logging
        with caplog.at_level(logging.WARNING, logger="lexsem.training"):
            config = T.TrainConfig(learning_rates={"head": 1e-3, "MaxPooling": 1e-5,
                                                   "attention": 1e-4, "chunk_recurrent": 1e-4,
                                                   "document_recurrent": 1e-4, "sentinel": 1e-4})
        assert "MaxPooling" not in config.learning_rates
        assert any("no parameters" in rec.message for rec in caplog.records)


def _training_setup(n_docs=12, seed=3, **cfg_overrides):
    docs, vocab = separable_corpus(n_docs=n_docs, n_labels=3, doc_len=(8, 14), seed=seed)
    vectors = random_vectors(3, 10, dim=6, seed=seed + 1)
    config = tiny_config(num_labels=3, embed_dim=6, chunk_size=6, chunk_hidden=3,
                         doc_hidden=3, attention_dim=3, learned_sentinel=True, **cfg_overrides)
    pipe = EmbeddingPipeline(vectors, config.chunk_size)
    return docs, config, pipe


def _rates(value):
    return {g: value for g in ("chunk_recurrent", "document_recurrent", "attention", "head", "sentinel")}


class TestTrainingLoop:
    def test_zero_epochs_returns_initial_params_and_empty_log(self, tmp_path):
        docs, config, pipe = _training_setup()
        params = M.init_params(config, seed=1)
        initial = {k: t.data.copy() for k, t in params.items()}
        result = T.train(config, params, docs, [], pipe.chunks_for,
                         T.TrainConfig(epochs=0, seed=1), out_dir=str(tmp_path))
        assert result.log == []
        assert all(np.array_equal(params[k].data, initial[k]) for k in params)
        assert (tmp_path / "final" / "manifest.json").exists()

    def test_descent_on_fixed_batch_is_monotone(self):
        docs, config, pipe = _training_setup(n_docs=4)
        params = M.init_params(config, seed=1)
        config_t = T.TrainConfig(epochs=20, batch_size=4, seed=1, shuffle=False, l2=0.0,
                                 learning_rates=_rates(1e-4))
        result = T.train(config, params, docs, [], pipe.chunks_for, config_t)
        losses = [r["train_loss"] for r in result.log]
        assert len(losses) == 20
        for a, b in zip(losses, losses[1:]):
            assert b <= a + 1e-9

    def test_seeded_runs_reproduce_first_epoch_loss(self):
        for _ in range(2):
            losses = []
            for run in range(2):
                docs, config, pipe = _training_setup()
                params = M.init_params(config, seed=9)
                result = T.train(config, params, docs, [], pipe.chunks_for,
                                 T.TrainConfig(epochs=1, batch_size=4, seed=11, learning_rates=_rates(1e-3)))
                losses.append(result.log[0]["train_loss"])
            assert losses[0] == losses[1]

    def test_l2_zero_matches_default_trajectory_bitwise(self):
        runs = []
        for l2 in (0.0, 0.0):
            docs, config, pipe = _training_setup()
            params = M.init_params(config, seed=2)
            T.train(config, params, docs, [], pipe.chunks_for,
                    T.TrainConfig(epochs=2, batch_size=4, seed=2, l2=l2, learning_rates=_rates(1e-3)))
            runs.append({k: t.data.copy() for k, t in params.items()})
        assert all(np.array_equal(runs[0][k], runs[1][k]) for k in runs[0])

    def test_l2_changes_trajectory(self):
        finals = []
        for l2 in (0.0, 1e-2):
            docs, config, pipe = _training_setup()
            params = M.init_params(config, seed=2)
            T.train(config, params, docs, [], pipe.chunks_for,
                    T.TrainConfig(epochs=2, batch_size=4, seed=2, l2=l2, learning_rates=_rates(1e-3)))
            finals.append(params["head.W"].data.copy())
        assert not np.array_equal(finals[0], finals[1])

    def test_shuffle_preserves_document_multiset(self):
        rng = np.random.default_rng(0)
        seen = []
        for batch in T._batches(17, 5, rng, shuffle=True):
            seen.extend(batch.tolist())
        assert sorted(seen) == list(range(17))

    def test_divergence_aborts_and_keeps_checkpoint(self, tmp_path, monkeypatch):
        docs, config, pipe = _training_setup()
        params = M.init_params(config, seed=1)

        calls = {"n": 0}
        original = T.loss

        def exploding_loss(gold, probs, weight=1.0, one_sided=False):
            calls["n"] += 1
            out = original(gold, probs, weight, one_sided)
            if calls["n"] > 6:
                out.data = np.array(np.nan)
            return out

        monkeypatch.setattr(T, "loss", exploding_loss)
        result = T.train(config, params, docs, [], pipe.chunks_for,
                         T.TrainConfig(epochs=5, batch_size=4, seed=1, learning_rates=_rates(1e-3)),
                         out_dir=str(tmp_path))
        assert result.diverged
        assert (tmp_path / "final" / "manifest.json").exists()
        M.load_checkpoint(str(tmp_path / "final"))  # last good checkpoint is intact

    def test_dev_selection_tracks_best_checkpoint(self, tmp_path):
        docs, config, pipe = _training_setup(n_docs=10)
        dev, _ = separable_corpus(n_docs=6, n_labels=3, doc_len=(8, 14), seed=77, id_prefix="dev")
        params = M.init_params(config, seed=1)
        result = T.train(config, params, docs, dev, pipe.chunks_for,
                         T.TrainConfig(epochs=3, batch_size=4, seed=1, learning_rates=_rates(1e-3)),
                         out_dir=str(tmp_path))
        assert len(result.log) == 3
        assert all("dev_macro_f1_per_label_mean" in rec for rec in result.log)
        assert (tmp_path / "best" / "manifest.json").exists()

    def test_metric_log_roundtrip(self, tmp_path):
        history = [{"epoch": 1, "train_loss": 0.5}, {"epoch": 2, "train_loss": 0.25}]
        path = str(tmp_path / "metrics.jsonl")
        T.write_metric_log(path, history)
        import json
        back = [json.loads(line) for line in open(path)]
        assert back == history

    def test_empty_corpus_rejected(self):
        _, config, pipe = _training_setup()
        with pytest.raises(ValueError):
            T.train(config, M.init_params(config, 1), [], [], pipe.chunks_for,
                    T.TrainConfig(epochs=1))

    def test_preset_defaults(self):
        binary = T.TrainConfig.preset_for("binary")
        multi = T.TrainConfig.preset_for("multilabel")
        assert binary.batch_size == 64 and multi.batch_size == 32
        assert binary.beta1 == 0.95
        assert multi.learning_rates["chunk_recurrent"] == 1e-5
        assert binary.learning_rates["chunk_recurrent"] == 1e-4
        assert binary.learning_rates["attention"] == 3e-5
