"""lexsem: hierarchical semantic classification of long legal case documents.

The pipeline chunks a document, encodes each chunk with a (bi)recurrent cell,
max-pools chunk and document summaries, attention-pools the concise view and
predicts labels through a sigmoid head.  Training runs on the package's own
reverse-mode autodiff with Adam and per-layer learning rates; evaluation fits
per-label decision thresholds and reports micro/macro metrics.
"""

__version__ = "0.1.0"

from .corpus import CaseDocument, LabelVocabulary, load_corpus
from .evaluation import MetricsReport, PredictionBatch, compute_metrics, fit_thresholds
from .model import ModelConfig, forward, init_params, load_checkpoint, predict, save_checkpoint
from .nn.kernels import ACTIVE_BACKEND
from .pipeline import EmbeddingPipeline
from .training import TrainConfig, train

__all__ = [
    "ACTIVE_BACKEND",
    "CaseDocument",
    "EmbeddingPipeline",
    "LabelVocabulary",
    "MetricsReport",
    "ModelConfig",
    "PredictionBatch",
    "TrainConfig",
    "__version__",
    "compute_metrics",
    "fit_thresholds",
    "forward",
    "init_params",
    "load_checkpoint",
    "load_corpus",
    "predict",
    "save_checkpoint",
    "train",
]
