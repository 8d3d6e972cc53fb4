"""Loss, Adam with per-layer-group learning rates, and the training loop."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import evaluation
from .corpus import TASK_BINARY, CaseDocument
from .model import ModelConfig, active_param_names, forward, group_of, save_checkpoint
from .nn import autodiff as ad
from .nn.autodiff import Tensor

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-12

# per-layer-group learning rates; pooling layers have no parameters, so any
# rate configured for them is warned about and dropped (see TrainConfig)
LR_PRESETS = {
    "binary_default": {
        "chunk_recurrent": 1e-4,
        "document_recurrent": 1e-4,
        "attention": 3e-5,
        "head": 3e-5,
        "sentinel": 1e-4,
    },
    "multilabel_default": {
        "chunk_recurrent": 1e-5,
        "document_recurrent": 1e-5,
        "attention": 3e-5,
        "head": 3e-5,
        "sentinel": 1e-5,
    },
}

_PARAMETERLESS_GROUPS = ("chunk_pooling", "document_pooling", "maxpooling", "globalmaxpooling")


class TrainingDiverged(Exception):
    def __init__(self, message: str, parameter: str | None = None):
        super().__init__(message)
        self.parameter = parameter


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    loss_weight: float = 1.0
    l2: float = 1e-5
    beta1: float = 0.95
    beta2: float = 0.999
    eps: float = 1e-8
    learning_rates: dict[str, float] = field(default_factory=lambda: dict(LR_PRESETS["multilabel_default"]))
    grad_clip: float | None = None   # max-norm when set; off by default
    seed: int = 42
    shuffle: bool = True
    one_sided_loss: bool = False     # fidelity switch: drop the (1-y)log(1-p) term
    stop_at_metric: float | None = None
    threshold_mode: str = "per-label"

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("Adam betas must lie in (0, 1)")
        cleaned = {}
        for group, rate in self.learning_rates.items():
            if group.lower().replace("-", "_") in _PARAMETERLESS_GROUPS:
                log.warning("learning rate for %r ignored: pooling layers have no parameters", group)
                continue
            if rate <= 0:
                raise ValueError(f"learning rate for {group!r} must be positive")
            cleaned[group] = float(rate)
        self.learning_rates = cleaned

    def rate_for(self, group: str) -> float:
        try:
            return self.learning_rates[group]
        except KeyError:
            raise KeyError(f"no learning rate configured for layer group {group!r}") from None

    @classmethod
    def preset_for(cls, task: str, **overrides) -> "TrainConfig":
        preset = "binary_default" if task == TASK_BINARY else "multilabel_default"
        defaults = dict(
            batch_size=64 if task == TASK_BINARY else 32,
            learning_rates=dict(LR_PRESETS[preset]),
            threshold_mode="global" if task == TASK_BINARY else "per-label",
        )
        defaults.update(overrides)
        return cls(**defaults)


# ---------------------------------------------------------------------------
# Loss

def loss(gold: np.ndarray, probabilities: Tensor, weight: float = 1.0,
         one_sided: bool = False) -> Tensor:
    """Weighted cross-entropy over the label vector.

    Default is full per-label binary cross-entropy; ``one_sided`` keeps only
    the positive-label term (the literal form, and the natural one for a
    softmax head, but it cannot train a multi-label sigmoid head on its own:
    predicting all ones would minimize it).
    """
    gold = np.asarray(gold, dtype=np.float64)
    if gold.shape != probabilities.data.shape:
        raise ValueError(f"gold shape {gold.shape} != prediction shape {probabilities.data.shape}")
    p = ad.clip(probabilities, PROB_CLAMP, 1.0 - PROB_CLAMP)
    positive = ad.mul(Tensor(gold), ad.log(p))
    if one_sided:
        total = ad.total(positive)
    else:
        negative = ad.mul(Tensor(1.0 - gold), ad.log(1.0 - p))
        total = ad.total(ad.add(positive, negative))
    return ad.scale(total, -weight)


# ---------------------------------------------------------------------------
# Optimizer

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: dict[str, Tensor]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(t.data) for name, t in params.items()},
            v={name: np.zeros_like(t.data) for name, t in params.items()},
        )


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> None:
    """One Adam update over the parameters named in ``grads``.

    L2 regularization enters as an added gradient term before the moment
    update.  Parameters absent from ``grads`` (e.g. stages disabled by an
    ablation) are untouched: no decay, no moment drift.
    """
    state.step += 1
    t = state.step
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(f"non-finite gradient for parameter {name!r}", parameter=name)
        p = params[name]
        if config.l2 > 0.0:
            g = g + config.l2 * p.data
        if config.grad_clip is not None:
            norm = float(np.linalg.norm(g))
            if norm > config.grad_clip:
                g = g * (config.grad_clip / norm)
        m = state.m[name] = config.beta1 * state.m[name] + (1.0 - config.beta1) * g
        v = state.v[name] = config.beta2 * state.v[name] + (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1**t)
        v_hat = v / (1.0 - config.beta2**t)
        rate = config.rate_for(group_of(name))
        p.data = p.data - rate * m_hat / (np.sqrt(v_hat) + config.eps)


# ---------------------------------------------------------------------------
# Training loop

@dataclass
class TrainResult:
    log: list[dict]
    best_dir: str | None
    final_dir: str | None
    diverged: bool = False
    stopped_early: bool = False


def _batches(n: int, batch_size: int, rng: np.random.Generator, shuffle: bool):
    order = np.arange(n)
    if shuffle:
        rng.shuffle(order)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train(
    model_config: ModelConfig,
    params: dict[str, Tensor],
    train_docs: list[CaseDocument],
    dev_docs: list[CaseDocument],
    chunks_for,
    config: TrainConfig,
    out_dir: str | None = None,
    scaler=None,
) -> TrainResult:
    """Shuffled mini-batch training with per-epoch dev evaluation.

    ``chunks_for(doc)`` supplies the per-chunk embedding matrices.  After each
    epoch, dev thresholds are refitted and metrics logged; the checkpoint with
    the best dev selection metric (macro-F1 for multi-label, accuracy for
    binary) is kept alongside the final one.
    """
    if config.epochs > 0 and not train_docs:
        raise ValueError("training corpus is empty")
    shuffle_rng = np.random.default_rng(config.seed)
    dropout_rng = np.random.default_rng(config.seed + 1)
    state = AdamState.for_params(params)
    active = active_param_names(model_config)
    select_metric = "accuracy" if model_config.task == TASK_BINARY else "macro_f1_per_label_mean"

    best_dir = os.path.join(out_dir, "best") if out_dir else None
    final_dir = os.path.join(out_dir, "final") if out_dir else None
    history: list[dict] = []
    best_score = -1.0
    diverged = False
    stopped_early = False

    def gold_for(doc: CaseDocument) -> np.ndarray:
        return doc.label_vector(model_config.num_labels)

    def save(where):
        if where:
            save_checkpoint(where, model_config, params, scaler=scaler)

    save(final_dir)  # initialized params are the first "last good" checkpoint

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        epoch_loss = 0.0
        for batch in _batches(len(train_docs), config.batch_size, shuffle_rng, config.shuffle):
            for p in params.values():
                p.zero_grad()
            batch_loss = 0.0
            for i in batch:
                doc = train_docs[i]
                trace = forward(model_config, params, chunks_for(doc), train=True, rng=dropout_rng)
                doc_loss = loss(gold_for(doc), trace.output, config.loss_weight, config.one_sided_loss)
                # mean over the batch: scale each contribution before backward
                ad.scale(doc_loss, 1.0 / len(batch)).backward()
                batch_loss += doc_loss.item() / len(batch)
            if not np.isfinite(batch_loss):
                log.error("loss diverged at epoch %d; keeping last good checkpoint", epoch)
                diverged = True
                break
            grads = {name: params[name].grad for name in active if params[name].grad is not None}
            try:
                adam_step(params, grads, state, config)
            except TrainingDiverged as err:
                log.error("%s at epoch %d; keeping last good checkpoint", err, epoch)
                diverged = True
                break
            epoch_loss += batch_loss * len(batch)
        if diverged:
            break

        epoch_loss /= max(len(train_docs), 1)
        record = {"epoch": epoch, "train_loss": epoch_loss}
        if dev_docs:
            probs = np.stack([forward(model_config, params, chunks_for(d)).probabilities for d in dev_docs])
            golds = np.stack([gold_for(d) for d in dev_docs])
            batch_pred = evaluation.PredictionBatch(probabilities=probs, gold=golds)
            thresholds = evaluation.fit_thresholds(batch_pred, mode=config.threshold_mode)
            report = evaluation.compute_metrics(batch_pred, thresholds, model_config.task)
            record.update({f"dev_{k}": v for k, v in report.summary().items()})
            score = record[f"dev_{select_metric}"]
            if score > best_score:
                best_score = score
                save(best_dir)
        record["wall_time"] = time.perf_counter() - t0
        history.append(record)
        log.info("epoch %d: loss %.5f%s", epoch, epoch_loss,
                 f", dev {select_metric} {best_score:.4f}" if dev_docs else "")
        save(final_dir)
        if (
            config.stop_at_metric is not None
            and dev_docs
            and record.get(f"dev_{select_metric}", -1.0) >= config.stop_at_metric
        ):
            stopped_early = True
            break

    if best_dir and best_score < 0 and not diverged:
        save(best_dir)  # no dev set: best == final
    return TrainResult(log=history, best_dir=best_dir, final_dir=final_dir,
                       diverged=diverged, stopped_early=stopped_early)


def write_metric_log(path: str, history: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in history:
            fh.write(json.dumps(record) + "\n")


def train_config_snapshot(config: TrainConfig) -> dict:
    return dataclasses.asdict(config)
