"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written as plain-Python scalar loops over
individual entries (no vectorization, no imports from the production numeric
paths) so numerical agreement is meaningful evidence.
"""

from __future__ import annotations

import math


def sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def matvec(W, x):
    return [sum(W[i][j] * x[j] for j in range(len(x))) for i in range(len(W))]


# ---------------------------------------------------------------------------
# Recurrent cells, one scalar step at a time

def gru_states(xs, p):
    """xs: list of input vectors; p: dict of nested-list weights."""
    H = len(p["bz"])
    h = [0.0] * H
    out = []
    for x in xs:
        z = [sigmoid(a + b + c) for a, b, c in zip(matvec(p["Wz"], x), matvec(p["Uz"], h), p["bz"])]
        r = [sigmoid(a + b + c) for a, b, c in zip(matvec(p["Wr"], x), matvec(p["Ur"], h), p["br"])]
        rh = [r[i] * h[i] for i in range(H)]
        c = [math.tanh(a + b + d) for a, b, d in zip(matvec(p["Wh"], x), matvec(p["Uh"], rh), p["bh"])]
        h = [(1.0 - z[i]) * h[i] + z[i] * c[i] for i in range(H)]
        out.append(h)
    return out


def lstm_states(xs, p):
    H = len(p["bi"])
    h = [0.0] * H
    cell = [0.0] * H
    out = []
    for x in xs:
        i = [sigmoid(a + b + c) for a, b, c in zip(matvec(p["Wi"], x), matvec(p["Ui"], h), p["bi"])]
        f = [sigmoid(a + b + c) for a, b, c in zip(matvec(p["Wf"], x), matvec(p["Uf"], h), p["bf"])]
        o = [sigmoid(a + b + c) for a, b, c in zip(matvec(p["Wo"], x), matvec(p["Uo"], h), p["bo"])]
        g = [math.tanh(a + b + c) for a, b, c in zip(matvec(p["Wg"], x), matvec(p["Ug"], h), p["bg"])]
        cell = [f[k] * cell[k] + i[k] * g[k] for k in range(H)]
        h = [o[k] * math.tanh(cell[k]) for k in range(H)]
        out.append(h)
    return out


def recurrent_states(xs, p, gate):
    return gru_states(xs, p) if gate == "gru" else lstm_states(xs, p)


def bidirectional_states(xs, p_fwd, p_bwd, gate):
    fwd = recurrent_states(xs, p_fwd, gate)
    bwd = list(reversed(recurrent_states(list(reversed(xs)), p_bwd, gate)))
    return [fwd[t] + bwd[t] for t in range(len(xs))]


def maxpool(rows):
    return [max(row[j] for row in rows) for j in range(len(rows[0]))]


def meanpool(rows):
    n = len(rows)
    return [sum(row[j] for row in rows) / n for j in range(len(rows[0]))]


def activate(vec, kind):
    if kind == "relu":
        return [v if v > 0.0 else 0.0 for v in vec]
    return [math.tanh(v) for v in vec]


def attention(values, W, b, u):
    scores = []
    for v in values:
        proj = [math.tanh(s + bb) for s, bb in zip(matvec(W, v), b)]
        scores.append(sum(ui * pi for ui, pi in zip(u, proj)))
    shift = max(scores)
    exps = [math.exp(s - shift) for s in scores]
    total = sum(exps)
    weights = [e / total for e in exps]
    return [sum(weights[t] * values[t][j] for t in range(len(values))) for j in range(len(values[0]))]


def softmax(scores):
    shift = max(scores)
    exps = [math.exp(s - shift) for s in scores]
    total = sum(exps)
    return [e / total for e in exps]


def full_forward(chunks, params, gate="gru", bidirectional=True, activation="relu",
                 head="sigmoid"):
    """Scalar-loop composition of the whole pipeline (all stages enabled).

    ``chunks``: list of chunk matrices as nested lists.  ``params``: nested-
    list weights keyed like the model's parameter names.
    """

    def cell(prefix, direction):
        lead = f"{prefix}.{direction}."
        return {k[len(lead):]: v for k, v in params.items() if k.startswith(lead)}

    def stage(prefix, rows):
        if bidirectional:
            return bidirectional_states(rows, cell(prefix, "fwd"), cell(prefix, "bwd"), gate)
        return recurrent_states(rows, cell(prefix, "fwd"), gate)

    chunk_vecs = [activate(maxpool(stage("chunk_rnn", chunk)), activation) for chunk in chunks]
    doc_states = stage("doc_rnn", chunk_vecs)
    doc_vec = activate(maxpool(doc_states), activation)
    concise = chunk_vecs + [doc_vec]
    attended = attention(concise, params["attention.W"], params["attention.b"], params["attention.u"])
    logits = [s + bb for s, bb in zip(matvec(params["head.W"], attended), params["head.b"])]
    if head == "sigmoid":
        return [sigmoid(v) for v in logits]
    return softmax(logits)


# ---------------------------------------------------------------------------
# Metrics and thresholds

def count_label(probs, gold, thresholds, j):
    tp = fp = fn = tn = 0
    for i in range(len(probs)):
        predicted = probs[i][j] >= thresholds[j]
        positive = gold[i][j] > 0
        if predicted and positive:
            tp += 1
        elif predicted:
            fp += 1
        elif positive:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def metrics_oracle(probs, gold, thresholds):
    """Counting is loop-based and independent; the final rate arithmetic uses
    the same operation order as the library so equality can be exact."""
    n_docs = len(probs)
    n_labels = len(probs[0])
    per_label = [count_label(probs, gold, thresholds, j) for j in range(n_labels)]

    tp = sum(c[0] for c in per_label)
    fp = sum(c[1] for c in per_label)
    fn = sum(c[2] for c in per_label)
    micro_p = tp / (tp + fp) if tp + fp else 0.0
    micro_r = tp / (tp + fn) if tp + fn else 0.0
    micro_f1 = 2.0 * micro_p * micro_r / (micro_p + micro_r) if micro_p + micro_r else 0.0

    precisions, recalls, f1s = [], [], []
    for tp_j, fp_j, fn_j, _ in per_label:
        p = tp_j / (tp_j + fp_j) if tp_j + fp_j else 0.0
        r = tp_j / (tp_j + fn_j) if tp_j + fn_j else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(2.0 * p * r / (p + r) if p + r else 0.0)
    macro_p = sum(precisions) / n_labels
    macro_r = sum(recalls) / n_labels
    macro_f1_mean = sum(f1s) / n_labels
    macro_f1_harmonic = 2.0 * macro_p * macro_r / (macro_p + macro_r) if macro_p + macro_r else 0.0

    matched = 0
    total_hits = 0
    for i in range(n_docs):
        hits = 0
        all_ok = True
        for j in range(n_labels):
            ok = (probs[i][j] >= thresholds[j]) == (gold[i][j] > 0)
            hits += ok
            all_ok = all_ok and ok
        matched += all_ok
        total_hits += hits
    return {
        "micro_precision": micro_p,
        "micro_recall": micro_r,
        "micro_f1": micro_f1,
        "macro_precision": macro_p,
        "macro_recall": macro_r,
        "macro_f1_per_label_mean": macro_f1_mean,
        "macro_f1_harmonic": macro_f1_harmonic,
        "multilabel_accuracy": total_hits / (n_docs * n_labels),
        "binary_accuracy": matched / n_docs,
        "per_label": per_label,
    }


def f1_at(probs, gold, t):
    tp = fp = fn = 0
    for p, g in zip(probs, gold):
        predicted = p >= t
        if predicted and g > 0:
            tp += 1
        elif predicted:
            fp += 1
        elif g > 0:
            fn += 1
    denom = 2 * tp + fp + fn
    return (2 * tp) / denom if denom else 0.0


def sweep_threshold(probs, gold):
    """Exhaustive scan over {0, midpoints, 1}; ties go to the larger cut."""
    distinct = sorted(set(probs))
    candidates = [0.0] + [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])] + [1.0]
    best_t, best_f1 = 0.0, -1.0
    for t in candidates:
        score = f1_at(probs, gold, t)
        if score >= best_f1:
            best_f1 = score
            best_t = t
    return best_t, best_f1
