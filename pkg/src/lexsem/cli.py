"""Command-line workflow: prepare, train, eval, predict, ablate, validate.

Configuration lives in one YAML file (see ``prepare``'s output for a worked
example); any key can be overridden per run with ``--set section.key=value``.
Every command writes a run manifest capturing the resolved configuration,
seed, input hashes, output paths and wall time.

Exit codes: 0 ok, 1 internal error, 2 input error, 3 data-format error.
Failures print a single machine-parsable line to stderr: ``<class>: <detail>``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time

import numpy as np
import yaml

from . import evaluation, synthetic, training
from .corpus import (
    TASK_BINARY,
    TASK_MULTILABEL,
    CorpusError,
    PrecomputedTensors,
    StaticVectors,
    load_corpus,
    save_corpus,
    save_static_vectors,
)
from .model import (
    CheckpointError,
    ConfigError,
    ModelConfig,
    init_params,
    load_checkpoint,
    predict_bits,
    forward,
)
from .pipeline import EmbeddingPipeline, fit_scaler_for
from .tensorfile import FormatError, validate_file
from .training import TrainConfig, train, write_metric_log

log = logging.getLogger("lexsem")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_FORMAT = 3


class CliError(Exception):
    def __init__(self, error_class: str, message: str, exit_code: int = EXIT_INPUT):
        super().__init__(message)
        self.error_class = error_class
        self.exit_code = exit_code


# ---------------------------------------------------------------------------
# Configuration handling

DEFAULT_CONFIG = {
    "task": TASK_MULTILABEL,
    "num_labels": None,
    "out_dir": "runs/latest",
    "corpus": {"train": None, "dev": None, "eval": None},
    "embedding": {"kind": "static", "path": None, "dim": None, "scale": False},
    "model": {},
    "train": {},
}


def _deep_update(base: dict, extra: dict) -> dict:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def _apply_overrides(config: dict, pairs: list[str]) -> dict:
    for pair in pairs:
        if "=" not in pair:
            raise CliError("config.invalid", f"--set expects section.key=value, got {pair!r}")
        dotted, raw = pair.split("=", 1)
        value = yaml.safe_load(raw)
        node = config
        *path, last = dotted.split(".")
        for part in path:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise CliError("config.invalid", f"cannot override scalar {part!r} in {dotted!r}")
        node[last] = value
    return config


def load_config(path: str | None, overrides: list[str]) -> dict:
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path:
        if not os.path.exists(path):
            raise CliError("io.missing_input", f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise CliError("config.invalid", f"{path}: top level must be a mapping")
        _deep_update(config, loaded)
    return _apply_overrides(config, overrides)


def _require(config: dict, dotted: str):
    node = config
    for part in dotted.split("."):
        node = node.get(part) if isinstance(node, dict) else None
    if node is None:
        raise CliError("config.invalid", f"missing required config key {dotted!r}")
    return node


def build_model_config(config: dict) -> ModelConfig:
    fields = dict(config.get("model") or {})
    kind = (config.get("embedding") or {}).get("kind", "static")
    fields.setdefault("learned_sentinel", kind == "static")
    try:
        return ModelConfig(
            task=config["task"],
            num_labels=int(_require(config, "num_labels")),
            embed_dim=int(_require(config, "embedding.dim")),
            **fields,
        )
    except (ConfigError, TypeError) as err:
        raise CliError("config.invalid", str(err)) from err


def build_train_config(config: dict) -> TrainConfig:
    try:
        return TrainConfig.preset_for(config["task"], **(config.get("train") or {}))
    except (ValueError, TypeError) as err:
        raise CliError("config.invalid", str(err)) from err


def build_source(config: dict, scaler=None):
    emb = config.get("embedding") or {}
    path = _require(config, "embedding.path")
    if not os.path.exists(path):
        raise CliError("io.missing_input", f"embedding file not found: {path}")
    if emb.get("kind", "static") == "static":
        source = StaticVectors.load(path, scaler=scaler)
    else:
        source = PrecomputedTensors(path, scaler=scaler, expected_dim=emb.get("dim"))
    if emb.get("dim") is not None and source.dimension != int(emb["dim"]):
        raise CliError("config.invalid",
                       f"embedding dim {source.dimension} in {path} != configured {emb['dim']}")
    return source


def _load_split(config: dict, split: str, required: bool = True):
    path = (config.get("corpus") or {}).get(split)
    if path is None:
        if required:
            raise CliError("config.invalid", f"missing corpus.{split} path")
        return None, None
    if not os.path.exists(path):
        raise CliError("io.missing_input", f"corpus file not found: {path}")
    docs, vocab = load_corpus(path, config["task"], num_labels=config.get("num_labels"))
    return docs, vocab


# ---------------------------------------------------------------------------
# Run manifests

def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(out_dir: str, command: str, config: dict, inputs: list[str],
                   outputs: list[str], seconds: float, seed) -> str:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {p: _sha256(p) for p in inputs if p and os.path.isfile(p)},
        "outputs": sorted(outputs),
        "wall_time_s": round(seconds, 3),
    }
    path = os.path.join(out_dir, f"manifest_{command}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


# ---------------------------------------------------------------------------
# Commands

def cmd_prepare(args) -> int:
    t0 = time.perf_counter()
    out = args.out
    os.makedirs(out, exist_ok=True)
    if args.kind == "separable":
        train_docs, vocab = synthetic.separable_corpus(n_docs=args.docs, n_labels=args.labels, seed=args.seed)
        dev_docs, _ = synthetic.separable_corpus(n_docs=max(args.docs // 2, 8), n_labels=args.labels, seed=args.seed + 1, id_prefix="dev")
        chunk_size, rates, epochs = 16, 0.02, 50
    else:
        train_docs, vocab = synthetic.planted_corpus(n_docs=args.docs, n_labels=args.labels, seed=args.seed)
        dev_docs, _ = synthetic.planted_corpus(n_docs=max(args.docs // 2, 8), n_labels=args.labels, seed=args.seed + 1, id_prefix="devlong")
        chunk_size, rates, epochs = 512, 0.02, 30
    vectors = synthetic.random_vectors(args.labels, 50, dim=args.dim, seed=args.seed + 2)

    paths = {
        "train": os.path.join(out, "train.jsonl"),
        "dev": os.path.join(out, "dev.jsonl"),
        "vectors": os.path.join(out, "vectors.txt"),
        "config": os.path.join(out, "config.yaml"),
    }
    save_corpus(paths["train"], train_docs, args.task)
    save_corpus(paths["dev"], dev_docs, args.task)
    save_static_vectors(paths["vectors"], vectors.table, vectors.dimension)

    config = {
        "task": args.task,
        "num_labels": vocab.size if args.task == TASK_MULTILABEL else 1,
        "out_dir": os.path.join(out, "run"),
        "corpus": {"train": paths["train"], "dev": paths["dev"], "eval": paths["dev"]},
        "embedding": {"kind": "static", "path": paths["vectors"], "dim": args.dim, "scale": True},
        "model": {
            "chunk_size": chunk_size,
            "chunk_hidden": 8,
            "doc_hidden": 8,
            "attention_dim": 8,
            "dropout": 0.0,
            "learned_sentinel": True,
        },
        "train": {
            "epochs": epochs,
            "batch_size": 8,
            "seed": args.seed,
            "l2": 0.0,
            "learning_rates": {g: rates for g in training.LR_PRESETS["multilabel_default"]},
        },
    }
    with open(paths["config"], "w", encoding="utf-8") as fh:
        yaml.safe_dump(config, fh, sort_keys=False)
    write_manifest(out, "prepare", config, [], list(paths.values()), time.perf_counter() - t0, args.seed)
    print(f"prepared {args.kind} corpus: {len(train_docs)} train / {len(dev_docs)} dev docs in {out}")
    print(f"next: lexsem train --config {paths['config']}")
    return EXIT_OK


def _setup_run(config: dict):
    model_config = build_model_config(config)
    train_config = build_train_config(config)
    train_docs, _ = _load_split(config, "train")
    dev_docs, _ = _load_split(config, "dev", required=False)
    scaler = None
    if (config.get("embedding") or {}).get("scale"):
        bare = build_source(config)
        scaler = fit_scaler_for(bare, train_docs, model_config.chunk_size)
    source = build_source(config, scaler=scaler)
    pipe = EmbeddingPipeline(source, model_config.chunk_size, model_config.truncate_to_last_chunk)
    return model_config, train_config, train_docs, dev_docs or [], pipe, scaler


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    config = load_config(args.config, args.set or [])
    if args.epochs is not None:
        config.setdefault("train", {})["epochs"] = args.epochs
    if args.seed is not None:
        config.setdefault("train", {})["seed"] = args.seed
    if args.out:
        config["out_dir"] = args.out
    model_config, train_config, train_docs, dev_docs, pipe, scaler = _setup_run(config)
    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)

    params = init_params(model_config, seed=train_config.seed)
    result = train(model_config, params, train_docs, dev_docs, pipe.chunks_for,
                   train_config, out_dir=out_dir, scaler=scaler)
    metrics_path = os.path.join(out_dir, "metrics.jsonl")
    write_metric_log(metrics_path, result.log)

    inputs = [p for p in [(config["corpus"] or {}).get("train"), (config["corpus"] or {}).get("dev"),
                          (config["embedding"] or {}).get("path")] if p]
    outputs = [metrics_path] + [d for d in [result.best_dir, result.final_dir] if d]
    write_manifest(out_dir, "train", config, inputs, outputs, time.perf_counter() - t0, train_config.seed)
    if result.diverged:
        print("training diverged; last good checkpoint kept", file=sys.stderr)
    for record in result.log:
        log.info("epoch %(epoch)d loss %(train_loss).5f", record)
    print(f"trained {len(result.log)} epoch(s); checkpoints in {out_dir}")
    return EXIT_OK


def _pipeline_for_checkpoint(config_dict, model_config, scaler):
    source = build_source(config_dict, scaler=scaler)
    return EmbeddingPipeline(source, model_config.chunk_size, model_config.truncate_to_last_chunk)


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    config = load_config(args.config, args.set or [])
    if args.checkpoint:
        checkpoint = args.checkpoint
    else:
        checkpoint = os.path.join(config["out_dir"], "best")
    if not os.path.isdir(checkpoint):
        raise CliError("io.missing_input", f"checkpoint not found: {checkpoint}")
    model_config, _params, scaler, _ = _try_checkpoint(checkpoint)

    corpus_path = args.corpus or (config.get("corpus") or {}).get("eval")
    if not corpus_path or not os.path.exists(corpus_path):
        raise CliError("io.missing_input", f"evaluation corpus not found: {corpus_path}")
    docs, _ = load_corpus(corpus_path, model_config.task,
                          num_labels=model_config.num_labels if model_config.task == TASK_MULTILABEL else None)
    pipe = _pipeline_for_checkpoint(config, model_config, scaler)

    dev_docs = None
    if args.fit == "dev":
        dev_path = (config.get("corpus") or {}).get("dev")
        if not dev_path:
            raise CliError("config.invalid", "dev-fit thresholds need corpus.dev")
        dev_docs, _ = load_corpus(dev_path, model_config.task,
                                  num_labels=model_config.num_labels if model_config.task == TASK_MULTILABEL else None)

    fit = {"self": evaluation.FIT_SELF, "dev": evaluation.FIT_DEV, "fixed": evaluation.FIT_FIXED}[args.fit]
    report, thresholds = evaluation.evaluate(checkpoint, docs, pipe.chunks_for, fit=fit,
                                             dev_docs=dev_docs, dev_chunks_for=pipe.chunks_for,
                                             objective=args.objective)
    print(report.to_json())
    out_dir = args.out or config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "eval_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    write_manifest(out_dir, "eval", config, [corpus_path], [report_path], time.perf_counter() - t0,
                   (config.get("train") or {}).get("seed", 42))
    return EXIT_OK


def _try_checkpoint(path: str):
    try:
        return load_checkpoint(path)
    except CheckpointError as err:
        raise CliError("data.checkpoint", str(err), EXIT_FORMAT) from err


def cmd_predict(args) -> int:
    t0 = time.perf_counter()
    config = load_config(args.config, args.set or [])
    model_config, params, scaler, thresholds = _try_checkpoint(args.checkpoint)
    if thresholds is None:
        thresholds = np.full(model_config.num_labels, 0.5)
    if not os.path.exists(args.corpus):
        raise CliError("io.missing_input", f"corpus file not found: {args.corpus}")
    docs, _ = load_corpus(args.corpus, model_config.task,
                          num_labels=model_config.num_labels if model_config.task == TASK_MULTILABEL else None)
    pipe = _pipeline_for_checkpoint(config, model_config, scaler)
    out_path = args.out
    with open(out_path, "w", encoding="utf-8") as fh:
        for doc in docs:
            probs = forward(model_config, params, pipe.chunks_for(doc)).probabilities
            bits = predict_bits(probs, thresholds)
            fh.write(json.dumps({
                "id": doc.id,
                "probabilities": [round(float(p), 6) for p in probs],
                "labels": [int(j) for j in np.flatnonzero(bits)],
            }) + "\n")
    out_dir = os.path.dirname(out_path) or "."
    write_manifest(out_dir, "predict", config, [args.corpus], [out_path], time.perf_counter() - t0, None)
    print(f"wrote predictions for {len(docs)} documents to {out_path}")
    return EXIT_OK


ABLATION_ROWS = (
    ("full", {}),
    ("no_chunk_semantics", {"chunk_semantics": False}),
    ("no_document_semantics", {"document_semantics": False}),
    ("no_concise_extraction", {"concise_extraction": False}),
)
GATE_ROWS = (("bigru", "gru", True), ("gru", "gru", False), ("bilstm", "lstm", True), ("lstm", "lstm", False))


def run_ablation(config: dict, with_truncation: bool = False) -> list[dict]:
    """Train/evaluate the component matrix and the gate sweep on one seed."""
    rows: list[dict] = []
    base_out = config["out_dir"]

    def one(name: str, model_overrides: dict):
        variant = json.loads(json.dumps(config))
        _deep_update(variant.setdefault("model", {}), model_overrides)
        variant["out_dir"] = os.path.join(base_out, "ablation", name)
        model_config, train_config, train_docs, dev_docs, pipe, scaler = _setup_run(variant)
        params = init_params(model_config, seed=train_config.seed)
        result = train(model_config, params, train_docs, dev_docs, pipe.chunks_for,
                       train_config, out_dir=variant["out_dir"], scaler=scaler)
        last = result.log[-1] if result.log else {}
        rows.append({
            "variant": name,
            "epochs_run": len(result.log),
            "diverged": result.diverged,
            "train_loss": last.get("train_loss"),
            "dev_macro_f1": last.get("dev_macro_f1_per_label_mean"),
            "dev_accuracy": last.get("dev_accuracy"),
            "checkpoint": result.final_dir,
        })

    for name, overrides in ABLATION_ROWS:
        one(name, overrides)
    for name, gate, bidir in GATE_ROWS:
        one(f"gate_{name}", {"gate": gate, "bidirectional": bidir})
    if with_truncation:
        one("full_document", {"truncate_to_last_chunk": False})
        one("last_window_only", {"truncate_to_last_chunk": True})
    return rows


def cmd_ablate(args) -> int:
    t0 = time.perf_counter()
    config = load_config(args.config, args.set or [])
    if args.out:
        config["out_dir"] = args.out
    rows = run_ablation(config, with_truncation=args.with_truncation)
    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    table_path = os.path.join(out_dir, "ablation.jsonl")
    with open(table_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    header = f"{'variant':24s} {'epochs':>6s} {'loss':>10s} {'dev macro-F1':>13s} {'dev acc':>9s}"
    print(header)
    print("-" * len(header))
    for row in rows:
        f1 = row["dev_macro_f1"]
        acc = row["dev_accuracy"]
        print(f"{row['variant']:24s} {row['epochs_run']:6d} "
              f"{(row['train_loss'] if row['train_loss'] is not None else float('nan')):10.4f} "
              f"{(f1 if f1 is not None else float('nan')):13.4f} "
              f"{(acc if acc is not None else float('nan')):9.4f}")
    write_manifest(out_dir, "ablate", config, [], [table_path], time.perf_counter() - t0,
                   (config.get("train") or {}).get("seed", 42))
    return EXIT_OK


def cmd_validate(args) -> int:
    if not os.path.exists(args.file):
        raise CliError("io.missing_input", f"tensor file not found: {args.file}")
    report = validate_file(args.file)
    if report.ok:
        print(f"{args.file}: ok (dimension {report.dimension}, "
              f"{report.entry_count} entries, {report.total_rows} rows)")
        return EXIT_OK
    raise CliError(report.error_class or "data.invalid",
                   f"{args.file}: {report.message}", EXIT_FORMAT)


# ---------------------------------------------------------------------------
# Entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lexsem", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="generate a synthetic quickstart corpus + config")
    p.add_argument("--kind", choices=["separable", "planted"], default="separable")
    p.add_argument("--out", required=True)
    p.add_argument("--task", choices=[TASK_MULTILABEL, TASK_BINARY], default=TASK_MULTILABEL)
    p.add_argument("--docs", type=int, default=32)
    p.add_argument("--labels", type=int, default=4)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train and checkpoint a model")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--checkpoint")
    p.add_argument("--corpus")
    p.add_argument("--fit", choices=["self", "dev", "fixed"], default="self")
    p.add_argument("--objective", choices=[evaluation.POLICY_F1, evaluation.POLICY_YOUDEN],
                   default=evaluation.POLICY_F1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write per-document label predictions")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="run the component matrix and gate sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--with-truncation", action="store_true",
                   help="also compare full-document vs last-window input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("validate", help="check a tensor container file")
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as err:
        print(f"{err.error_class}: {err}", file=sys.stderr)
        return err.exit_code
    except FileNotFoundError as err:
        print(f"io.missing_input: {err}", file=sys.stderr)
        return EXIT_INPUT
    except CorpusError as err:
        print(f"data.bad_record: {err}", file=sys.stderr)
        return EXIT_INPUT
    except FormatError as err:
        print(f"{err.error_class}: {err}", file=sys.stderr)
        return EXIT_FORMAT
    except CheckpointError as err:
        print(f"data.checkpoint: {err}", file=sys.stderr)
        return EXIT_FORMAT
    except (ConfigError, ValueError, KeyError) as err:
        print(f"config.invalid: {err}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as err:  # pragma: no cover - safety net
        print(f"internal.error: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
