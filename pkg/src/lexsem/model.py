"""The hierarchical classifier: chunk encoder, document encoder, concise
attention pooling and the sigmoid/softmax prediction head.

A document arrives as a list of per-chunk embedding matrices.  Each enabled
stage runs in order:

1. per chunk: recurrent pass over the rows, temporal max-pool, activation
   -> one summary vector per chunk;
2. the chunk summaries, in order, form the document-level sequence;
3. recurrent pass over that sequence, global max-pool, activation
   -> one document vector;
4. concise extraction: the chunk summaries with the document vector
   appended LAST (court documents put their summary at the end) are
   attention-pooled into a single enriched vector;
5. head: sigmoid (default) or softmax over an affine map of that vector.

Ablation switches replace stage 1 with raw per-chunk token means, drop the
document vector from stage 4, or bypass stage 4 so the head reads the
document vector directly.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import tensorfile
from .corpus import TASK_BINARY, TASK_MULTILABEL, FeatureScaler, load_scaler, save_scaler
from .nn import autodiff as ad
from .nn import layers as L
from .nn.autodiff import Tensor

RELU = "relu"
TANH = "tanh"
HEAD_SIGMOID = "sigmoid"
HEAD_SOFTMAX = "softmax"

LAYER_GROUPS = {
    "chunk_rnn": "chunk_recurrent",
    "doc_rnn": "document_recurrent",
    "attention": "attention",
    "head": "head",
    "sentinel": "sentinel",
}


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    task: str
    num_labels: int
    embed_dim: int
    chunk_size: int = 512
    gate: str = L.GRU
    bidirectional: bool = True
    chunk_hidden: int = 128
    doc_hidden: int = 128
    attention_dim: int = 128
    dropout: float = 0.5
    chunk_semantics: bool = True
    document_semantics: bool = True
    concise_extraction: bool = True
    recurrent_head_bias: bool = False
    hidden_activation: str = RELU
    head: str = HEAD_SIGMOID
    learned_sentinel: bool = False
    truncate_to_last_chunk: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.task not in (TASK_MULTILABEL, TASK_BINARY):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.num_labels < 1:
            raise ConfigError("num_labels must be >= 1")
        if self.task == TASK_BINARY and self.head == HEAD_SIGMOID and self.num_labels != 1:
            raise ConfigError("binary task with a sigmoid head uses a single output")
        if self.head == HEAD_SOFTMAX and self.num_labels < 2:
            raise ConfigError("softmax head needs at least 2 outputs")
        if self.head not in (HEAD_SIGMOID, HEAD_SOFTMAX):
            raise ConfigError(f"unknown head {self.head!r}")
        if self.gate not in (L.GRU, L.LSTM):
            raise ConfigError(f"unknown gate {self.gate!r}")
        if self.hidden_activation not in (RELU, TANH):
            raise ConfigError(f"unknown activation {self.hidden_activation!r}")
        if not (self.chunk_semantics or self.document_semantics or self.concise_extraction):
            raise ConfigError("at least one of the semantic stages must stay enabled")
        if not self.concise_extraction and not self.document_semantics:
            raise ConfigError("disabling concise extraction requires the document stage (the head needs its vector)")
        if self.recurrent_head_bias and not self.document_semantics:
            raise ConfigError("the recurrent head bias needs the document-level sequence")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.concise_extraction and self.document_semantics and self.chunk_feature_dim != self.doc_feature_dim:
            raise ConfigError(
                "concise extraction pools chunk summaries together with the document vector, "
                f"so their widths must match ({self.chunk_feature_dim} != {self.doc_feature_dim})"
            )

    @property
    def directions(self) -> int:
        return 2 if self.bidirectional else 1

    @property
    def chunk_feature_dim(self) -> int:
        """Width of one chunk summary vector."""
        return self.directions * self.chunk_hidden if self.chunk_semantics else self.embed_dim

    @property
    def doc_feature_dim(self) -> int:
        return self.directions * self.doc_hidden

    @property
    def head_input_dim(self) -> int:
        return self.chunk_feature_dim if self.concise_extraction else self.doc_feature_dim

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls(**json.loads(text))


# ---------------------------------------------------------------------------
# Parameters

def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    gates = L._GATES[config.gate]
    dirs = ("fwd", "bwd") if config.bidirectional else ("fwd",)

    def cell(prefix: str, in_dim: int, hidden: int):
        for direction in dirs:
            for g in gates:
                shapes[f"{prefix}.{direction}.W{g}"] = (hidden, in_dim)
                shapes[f"{prefix}.{direction}.U{g}"] = (hidden, hidden)
                shapes[f"{prefix}.{direction}.b{g}"] = (hidden,)

    cell("chunk_rnn", config.embed_dim, config.chunk_hidden)
    cell("doc_rnn", config.chunk_feature_dim, config.doc_hidden)
    # the concise sequence stacks chunk summaries (and the document vector,
    # width-tied by validate()), so attention always reads chunk-width rows
    shapes["attention.W"] = (config.attention_dim, config.chunk_feature_dim)
    shapes["attention.b"] = (config.attention_dim,)
    shapes["attention.u"] = (config.attention_dim,)
    shapes["head.W"] = (config.num_labels, config.head_input_dim)
    shapes["head.b"] = (config.num_labels,)
    if config.recurrent_head_bias:
        shapes["head.U"] = (config.num_labels, config.doc_feature_dim)
    if config.learned_sentinel:
        shapes["sentinel"] = (config.embed_dim,)
    return shapes


def init_params(config: ModelConfig, seed: int = 42) -> dict[str, Tensor]:
    """Glorot-uniform matrices, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}
    for name, shape in param_shapes(config).items():
        base = name.rsplit(".", 1)[-1]
        if len(shape) == 2:
            data = L.glorot_matrix(rng, *shape)
        elif base.startswith("b"):
            data = np.zeros(shape)
        else:  # 1-d non-bias vectors: attention context, sentinel
            data = L.glorot_vector(rng, shape[0])
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


def group_of(param_name: str) -> str:
    return LAYER_GROUPS[param_name.split(".", 1)[0]]


def active_param_names(config: ModelConfig) -> set[str]:
    """Parameters that participate in the forward pass under this config.

    Disabled stages keep their tensors (so checkpoints stay structurally
    comparable across ablations) but the optimizer must not touch them.
    """
    names = set(param_shapes(config))
    if not config.chunk_semantics:
        names = {n for n in names if not n.startswith("chunk_rnn.")}
    if not config.document_semantics:
        names = {n for n in names if not n.startswith("doc_rnn.")}
    if not config.concise_extraction:
        names = {n for n in names if not n.startswith("attention.")}
    return names


# ---------------------------------------------------------------------------
# Forward pass

@dataclass
class ForwardTrace:
    chunk_vectors: list[np.ndarray]
    chunk_sequence: np.ndarray
    document_vector: np.ndarray | None
    concise_sequence: np.ndarray | None
    attended: np.ndarray | None
    probabilities: np.ndarray
    output: Tensor = field(repr=False)


def _activation(config: ModelConfig, x: Tensor) -> Tensor:
    return ad.relu(x) if config.hidden_activation == RELU else ad.tanh(x)


def _cell_params(params: dict[str, Tensor], prefix: str, direction: str) -> dict[str, Tensor]:
    lead = f"{prefix}.{direction}."
    return {name[len(lead):]: t for name, t in params.items() if name.startswith(lead)}


def _recurrent_stage(config: ModelConfig, params: dict[str, Tensor], prefix: str, seq: Tensor) -> Tensor:
    fwd = _cell_params(params, prefix, "fwd")
    if config.bidirectional:
        return L.bidirectional(fwd, _cell_params(params, prefix, "bwd"), seq, config.gate)
    return L.recurrent_forward(fwd, seq, config.gate, "forward")


def forward(
    config: ModelConfig,
    params: dict[str, Tensor],
    chunks: list[np.ndarray],
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> ForwardTrace:
    """Run the enabled stages over one document's chunk embedding matrices."""
    if not chunks:
        raise ValueError("a document must have at least one chunk")
    for i, c in enumerate(chunks):
        if c.ndim != 2 or c.shape[1] != config.embed_dim:
            raise ValueError(f"chunk {i} has shape {c.shape}, expected (*, {config.embed_dim})")

    inputs = [Tensor(c) for c in chunks]
    if config.learned_sentinel:
        inputs = [ad.concat_rows([params["sentinel"], x]) for x in inputs]

    if config.chunk_semantics:
        chunk_vecs = [
            _activation(config, L.max_pool_time(_recurrent_stage(config, params, "chunk_rnn", x)))
            for x in inputs
        ]
    else:
        chunk_vecs = [ad.mean_rows(x) for x in inputs]

    chunk_seq = ad.concat_rows(chunk_vecs)

    doc_states = None
    doc_vec = None
    if config.document_semantics:
        doc_states = _recurrent_stage(config, params, "doc_rnn", chunk_seq)
        doc_vec = _activation(config, L.global_max_pool(doc_states))

    concise = None
    attended = None
    if config.concise_extraction:
        parts = list(chunk_vecs) + ([doc_vec] if doc_vec is not None else [])
        concise = ad.concat_rows(parts)
        attended = L.attention_pool(
            {"W": params["attention.W"], "b": params["attention.b"], "u": params["attention.u"]},
            concise,
        )
        feature = attended
    else:
        feature = doc_vec

    if train and config.dropout > 0.0:
        feature = L.dropout(feature, config.dropout, "train", rng)

    logits = L.dense(params["head.W"], params["head.b"], feature)
    if config.recurrent_head_bias:
        logits = ad.add(logits, ad.matmul(params["head.U"], ad.row(doc_states, chunk_seq.data.shape[0] - 1)))
    probs = ad.sigmoid(logits) if config.head == HEAD_SIGMOID else ad.softmax(logits)

    return ForwardTrace(
        chunk_vectors=[v.data for v in chunk_vecs],
        chunk_sequence=chunk_seq.data,
        document_vector=None if doc_vec is None else doc_vec.data,
        concise_sequence=None if concise is None else concise.data,
        attended=None if attended is None else attended.data,
        probabilities=probs.data,
        output=probs,
    )


def predict_bits(probabilities: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Binarize: label j is on iff its probability is >= its threshold."""
    probabilities = np.asarray(probabilities)
    thresholds = np.asarray(thresholds)
    if probabilities.shape[-1] != thresholds.shape[0]:
        raise ValueError(f"{thresholds.shape[0]} thresholds for {probabilities.shape[-1]} labels")
    return (probabilities >= thresholds).astype(np.int64)


def predict(config: ModelConfig, params: dict[str, Tensor], chunks: list[np.ndarray],
            thresholds: np.ndarray) -> np.ndarray:
    return predict_bits(forward(config, params, chunks).probabilities, thresholds)


# ---------------------------------------------------------------------------
# Checkpoints

PARAMS_FILE = "params.semt"
CONFIG_FILE = "config.json"
SCALER_FILE = "scaler.semt"
THRESHOLDS_FILE = "thresholds.json"
MANIFEST_FILE = "manifest.json"


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def save_checkpoint(
    directory: str,
    config: ModelConfig,
    params: dict[str, Tensor],
    scaler: FeatureScaler | None = None,
    thresholds: np.ndarray | None = None,
) -> None:
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, CONFIG_FILE), "w", encoding="utf-8") as fh:
        fh.write(config.to_json() + "\n")
    # parameters are stored flattened (container dimension 1); shapes are
    # reconstructed from the config on load
    tensorfile.write_entries(
        os.path.join(directory, PARAMS_FILE),
        1,
        [(name, 0, t.data.reshape(-1, 1)) for name, t in sorted(params.items())],
    )
    files = [CONFIG_FILE, PARAMS_FILE]
    if scaler is not None:
        save_scaler(os.path.join(directory, SCALER_FILE), scaler)
        files.append(SCALER_FILE)
    if thresholds is not None:
        with open(os.path.join(directory, THRESHOLDS_FILE), "w", encoding="utf-8") as fh:
            json.dump({"thresholds": [float(t) for t in thresholds]}, fh)
        files.append(THRESHOLDS_FILE)
    manifest = {"format": 1, "files": {name: _sha256(os.path.join(directory, name)) for name in files}}
    with open(os.path.join(directory, MANIFEST_FILE), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


class CheckpointError(Exception):
    pass


def load_checkpoint(directory: str, verify: bool = True):
    """Returns (config, params, scaler | None, thresholds | None)."""
    manifest_path = os.path.join(directory, MANIFEST_FILE)
    if not os.path.exists(manifest_path):
        raise CheckpointError(f"{directory}: missing {MANIFEST_FILE}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if verify:
        for name, expected in manifest["files"].items():
            actual = _sha256(os.path.join(directory, name))
            if actual != expected:
                raise CheckpointError(f"{directory}/{name}: hash mismatch (checkpoint corrupted)")
    with open(os.path.join(directory, CONFIG_FILE), "r", encoding="utf-8") as fh:
        config = ModelConfig.from_json(fh.read())
    shapes = param_shapes(config)
    _, entries = tensorfile.read_entries(os.path.join(directory, PARAMS_FILE))
    params: dict[str, Tensor] = {}
    for name, _, flat in entries:
        if name not in shapes:
            raise CheckpointError(f"unexpected parameter {name!r} in checkpoint")
        params[name] = Tensor(np.asarray(flat, dtype=np.float64).reshape(shapes[name]),
                              requires_grad=True, name=name)
    missing = set(shapes) - set(params)
    if missing:
        raise CheckpointError(f"checkpoint lacks parameters: {sorted(missing)}")
    scaler = None
    if SCALER_FILE in manifest["files"]:
        scaler = load_scaler(os.path.join(directory, SCALER_FILE))
    thresholds = None
    if THRESHOLDS_FILE in manifest["files"]:
        with open(os.path.join(directory, THRESHOLDS_FILE), "r", encoding="utf-8") as fh:
            thresholds = np.asarray(json.load(fh)["thresholds"], dtype=np.float64)
    return config, params, scaler, thresholds
