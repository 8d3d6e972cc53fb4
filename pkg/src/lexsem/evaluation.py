"""Dynamic threshold fitting and micro/macro classification metrics.

F1 against a threshold is piecewise constant between distinct predicted
probabilities, so the candidate set {0, midpoints of consecutive distinct
sorted probabilities, 1} covers every achievable binarization.  Ties in the
objective break toward the larger threshold.

Macro-F1 is reported under both conventions in circulation: the arithmetic
mean of per-label F1 scores (primary; matches how the per-label mean relates
to reported macro precision/recall) and the harmonic mean of macro-P and
macro-R (reported alongside as ``macro_f1_harmonic``).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import TASK_BINARY
from .model import forward, load_checkpoint

log = logging.getLogger(__name__)

PER_LABEL = "per-label"
GLOBAL = "global"

POLICY_F1 = "f1"
POLICY_YOUDEN = "youden"


@dataclass
class PredictionBatch:
    probabilities: np.ndarray  # (docs, labels) in [0, 1]
    gold: np.ndarray           # (docs, labels) in {0, 1}

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=np.float64)
        self.gold = np.asarray(self.gold, dtype=np.float64)
        if self.probabilities.shape != self.gold.shape:
            raise ValueError("probabilities and gold must share one (docs, labels) shape")
        if self.probabilities.ndim != 2 or self.probabilities.shape[0] == 0:
            raise ValueError("batch must hold at least one document")
        if ((self.probabilities < 0) | (self.probabilities > 1)).any():
            raise ValueError("probabilities must lie in [0, 1]")

    @property
    def num_labels(self) -> int:
        return self.probabilities.shape[1]


def _candidates(probs: np.ndarray) -> list[float]:
    distinct = np.unique(probs)
    mids = [(a + b) / 2.0 for a, b in zip(distinct[:-1], distinct[1:])]
    return [0.0] + mids + [1.0]


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return (2 * tp) / denom if denom else 0.0


def _best_threshold(probs: np.ndarray, gold: np.ndarray, objective: str) -> float:
    best_t, best_score = 0.0, -np.inf
    for t in _candidates(probs):
        pred = probs >= t
        tp = int(np.sum(pred & (gold > 0)))
        fp = int(np.sum(pred & (gold <= 0)))
        fn = int(np.sum(~pred & (gold > 0)))
        tn = int(np.sum(~pred & (gold <= 0)))
        if objective == POLICY_F1:
            score = _f1_from_counts(tp, fp, fn)
        else:  # Youden's J over the ROC: TPR - FPR
            tpr = tp / (tp + fn) if tp + fn else 0.0
            fpr = fp / (fp + tn) if fp + tn else 0.0
            score = tpr - fpr
        if score >= best_score:  # >= breaks ties toward the larger threshold
            best_score = score
            best_t = t
    return best_t


def fit_thresholds(dev: PredictionBatch, mode: str = PER_LABEL,
                   objective: str = POLICY_F1) -> np.ndarray:
    """Per-label (or one shared) decision thresholds maximizing the objective.

    Labels with no positive gold instance get threshold 1.0 (every candidate
    scores 0 there) and are warned about.
    """
    if mode not in (PER_LABEL, GLOBAL):
        raise ValueError(f"unknown threshold mode {mode!r}")
    if objective not in (POLICY_F1, POLICY_YOUDEN):
        raise ValueError(f"unknown threshold objective {objective!r}")
    if mode == GLOBAL:
        t = _best_threshold(dev.probabilities.ravel(), dev.gold.ravel(), objective)
        return np.full(dev.num_labels, t, dtype=np.float64)
    thresholds = np.empty(dev.num_labels, dtype=np.float64)
    for j in range(dev.num_labels):
        if not (dev.gold[:, j] > 0).any():
            log.warning("label %d has no positive gold instance; threshold set to 1.0", j)
        thresholds[j] = _best_threshold(dev.probabilities[:, j], dev.gold[:, j], objective)
    return thresholds


# ---------------------------------------------------------------------------
# Metrics

@dataclass
class LabelCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0

    @property
    def degenerate(self) -> bool:
        """True when P, R or F1 had a zero denominator (possible only at tp=0)."""
        return self.tp == 0


@dataclass
class MetricsReport:
    task: str
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1_per_label_mean: float
    macro_f1_harmonic: float
    accuracy: float
    per_label: list[LabelCounts] = field(default_factory=list)
    flagged_labels: list[int] = field(default_factory=list)
    threshold_policy: str = ""

    def summary(self) -> dict[str, float]:
        return {
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1_per_label_mean": self.macro_f1_per_label_mean,
            "macro_f1_harmonic": self.macro_f1_harmonic,
            "accuracy": self.accuracy,
        }

    def to_json(self) -> str:
        payload = dict(self.summary())
        payload.update(
            task=self.task,
            threshold_policy=self.threshold_policy,
            flagged_labels=self.flagged_labels,
            per_label=[
                {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn,
                 "precision": c.precision, "recall": c.recall, "f1": c.f1}
                for c in self.per_label
            ],
        )
        return json.dumps(payload, indent=2, sort_keys=True)


def compute_metrics(batch: PredictionBatch, thresholds: np.ndarray, task: str,
                    threshold_policy: str = "") -> MetricsReport:
    """Binarize, accumulate per-label confusion counts, aggregate both ways.

    Zero-denominator precision/recall/F1 count as 0 (the label stays in the
    macro mean) and the label index is flagged in the report.
    """
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if thresholds.shape != (batch.num_labels,):
        raise ValueError(f"expected {batch.num_labels} thresholds, got {thresholds.shape}")
    pred = batch.probabilities >= thresholds
    gold = batch.gold > 0

    counts: list[LabelCounts] = []
    flagged: list[int] = []
    for j in range(batch.num_labels):
        c = LabelCounts(
            tp=int(np.sum(pred[:, j] & gold[:, j])),
            fp=int(np.sum(pred[:, j] & ~gold[:, j])),
            fn=int(np.sum(~pred[:, j] & gold[:, j])),
            tn=int(np.sum(~pred[:, j] & ~gold[:, j])),
        )
        counts.append(c)
        if c.degenerate:
            flagged.append(j)

    tp = sum(c.tp for c in counts)
    fp = sum(c.fp for c in counts)
    fn = sum(c.fn for c in counts)
    micro_p = tp / (tp + fp) if tp + fp else 0.0
    micro_r = tp / (tp + fn) if tp + fn else 0.0
    micro_f1 = 2.0 * micro_p * micro_r / (micro_p + micro_r) if micro_p + micro_r else 0.0

    n = batch.num_labels
    macro_p = sum(c.precision for c in counts) / n
    macro_r = sum(c.recall for c in counts) / n
    macro_f1_mean = sum(c.f1 for c in counts) / n
    macro_f1_harmonic = 2.0 * macro_p * macro_r / (macro_p + macro_r) if macro_p + macro_r else 0.0

    if task == TASK_BINARY:
        accuracy = int(np.sum(np.all(pred == gold, axis=1))) / pred.shape[0]
    else:
        # mean over documents of the fraction of label bits matched; with equal
        # weights that is exactly (matched bits) / (docs * labels)
        accuracy = int(np.sum(pred == gold)) / (pred.shape[0] * pred.shape[1])

    return MetricsReport(
        task=task,
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=micro_f1,
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1_per_label_mean=macro_f1_mean,
        macro_f1_harmonic=macro_f1_harmonic,
        accuracy=accuracy,
        per_label=counts,
        flagged_labels=flagged,
        threshold_policy=threshold_policy,
    )


# ---------------------------------------------------------------------------
# Checkpoint-level evaluation

FIT_SELF = "self-fit"
FIT_DEV = "dev-fit"
FIT_FIXED = "fixed"


def evaluate(
    checkpoint_dir: str,
    docs,
    chunks_for,
    fit: str = FIT_SELF,
    dev_docs=None,
    dev_chunks_for=None,
    objective: str = POLICY_F1,
):
    """Run eval-mode inference and report metrics; returns (report, thresholds).

    ``fit`` picks where thresholds come from: the evaluation batch itself,
    a dev split, or the thresholds stored in the checkpoint (falling back to
    0.5 everywhere).  The chosen policy is recorded in the report.
    """
    config, params, _, stored = load_checkpoint(checkpoint_dir)
    if not docs:
        raise ValueError("evaluation corpus is empty")

    def batch_for(some_docs, embed):
        probs = np.stack([forward(config, params, embed(d)).probabilities for d in some_docs])
        gold = np.stack([d.label_vector(config.num_labels) for d in some_docs])
        return PredictionBatch(probabilities=probs, gold=gold)

    batch = batch_for(docs, chunks_for)
    if fit == FIT_SELF:
        mode = GLOBAL if config.task == TASK_BINARY else PER_LABEL
        thresholds = fit_thresholds(batch, mode=mode, objective=objective)
    elif fit == FIT_DEV:
        if dev_docs is None:
            raise ValueError("dev-fit thresholds need a dev corpus")
        mode = GLOBAL if config.task == TASK_BINARY else PER_LABEL
        thresholds = fit_thresholds(batch_for(dev_docs, dev_chunks_for or chunks_for), mode=mode, objective=objective)
    elif fit == FIT_FIXED:
        thresholds = stored if stored is not None else np.full(config.num_labels, 0.5)
    else:
        raise ValueError(f"unknown threshold fit policy {fit!r}")

    policy = f"{fit}/{objective}" if fit != FIT_FIXED else fit
    report = compute_metrics(batch, thresholds, config.task, threshold_policy=policy)
    return report, thresholds
