"""Differentiable layers: recurrent cells, pooling, attention, dense heads.

Parameters are plain dicts of named :class:`Tensor` objects so the optimizer
can address them by name and map them to learning-rate groups.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from . import kernels as K
from .autodiff import Tensor

GRU = "gru"
LSTM = "lstm"

_GATES = {GRU: K.GRU_GATES, LSTM: K.LSTM_GATES}


def glorot_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def glorot_vector(rng: np.random.Generator, size: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (size + 1))
    return rng.uniform(-limit, limit, size=size)


def init_recurrent(rng: np.random.Generator, kind: str, input_dim: int, hidden: int) -> dict[str, Tensor]:
    """Gate matrices W* (H x d), U* (H x H) and zero biases b* for one cell."""
    params: dict[str, Tensor] = {}
    for gate in _GATES[kind]:
        params[f"W{gate}"] = Tensor(glorot_matrix(rng, hidden, input_dim), requires_grad=True)
        params[f"U{gate}"] = Tensor(glorot_matrix(rng, hidden, hidden), requires_grad=True)
        params[f"b{gate}"] = Tensor(np.zeros(hidden), requires_grad=True)
    return params


def _contig(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=ad.DTYPE)


def gru_layer(x: Tensor, p: dict[str, Tensor]) -> Tensor:
    """Run the fused GRU kernel over a (T, d) sequence; returns (T, H) states."""
    mats = tuple(p[name].data for name in ("Wz", "Wr", "Wh", "Uz", "Ur", "Uh"))
    h, cache = K.gru_forward(_contig(x.data), *[_contig(m) for m in mats],
                             _contig(p["bz"].data), _contig(p["br"].data), _contig(p["bh"].data))

    def vjp(g):
        return K.gru_backward(_contig(g), cache, *mats)

    parents = (x, p["Wz"], p["Wr"], p["Wh"], p["Uz"], p["Ur"], p["Uh"], p["bz"], p["br"], p["bh"])
    return Tensor(h, _parents=parents, _vjp=vjp)


def lstm_layer(x: Tensor, p: dict[str, Tensor]) -> Tensor:
    mats = tuple(p[name].data for name in ("Wi", "Wf", "Wo", "Wg", "Ui", "Uf", "Uo", "Ug"))
    biases = tuple(_contig(p[f"b{g}"].data) for g in K.LSTM_GATES)
    h, cache = K.lstm_forward(_contig(x.data), *[_contig(m) for m in mats], *biases)

    def vjp(g):
        return K.lstm_backward(_contig(g), cache, *mats)

    parents = (x,) + tuple(p[n] for n in ("Wi", "Wf", "Wo", "Wg", "Ui", "Uf", "Uo", "Ug", "bi", "bf", "bo", "bg"))
    return Tensor(h, _parents=parents, _vjp=vjp)


def recurrent_forward(params: dict[str, Tensor], inputs: Tensor, kind: str = GRU,
                      direction: str = "forward") -> Tensor:
    """One recurrent pass over a (T, d) sequence, zero initial state.

    direction="backward" consumes the reversed sequence and re-reverses the
    outputs, so output row t still corresponds to input row t.
    """
    if inputs.data.ndim != 2 or inputs.data.shape[0] == 0:
        raise ValueError("inputs must be a non-empty (T, d) sequence")
    expected = params["Wz" if kind == GRU else "Wi"].data.shape[1]
    if inputs.data.shape[1] != expected:
        raise ValueError(f"input dim {inputs.data.shape[1]} != cell input dim {expected}")
    run = gru_layer if kind == GRU else lstm_layer
    if direction == "forward":
        return run(inputs, params)
    if direction == "backward":
        return ad.flip_rows(run(ad.flip_rows(inputs), params))
    raise ValueError(f"unknown direction {direction!r}")


def bidirectional(params_fwd: dict[str, Tensor], params_bwd: dict[str, Tensor],
                  inputs: Tensor, kind: str = GRU) -> Tensor:
    """Concat of forward and (aligned) backward states: (T, 2H)."""
    fwd = recurrent_forward(params_fwd, inputs, kind, "forward")
    bwd = recurrent_forward(params_bwd, inputs, kind, "backward")
    return ad.concat_cols(fwd, bwd)


def max_pool_time(states: Tensor) -> Tensor:
    """Elementwise max over timesteps of a (T, D) sequence."""
    return ad.max_rows(states)


def global_max_pool(states: Tensor) -> Tensor:
    """Same contract as max_pool_time, applied to the document-level sequence."""
    return ad.max_rows(states)


def init_attention(rng: np.random.Generator, input_dim: int, attention_dim: int) -> dict[str, Tensor]:
    return {
        "W": Tensor(glorot_matrix(rng, attention_dim, input_dim), requires_grad=True),
        "b": Tensor(np.zeros(attention_dim), requires_grad=True),
        "u": Tensor(glorot_vector(rng, attention_dim), requires_grad=True),
    }


def attention_pool(params: dict[str, Tensor], values: Tensor) -> Tensor:
    """Additive attention: softmax(u . tanh(W v_t + b)) weighted sum of values."""
    if values.data.ndim != 2 or values.data.shape[0] == 0:
        raise ValueError("values must be a non-empty (T, D) sequence")
    if values.data.shape[1] != params["W"].data.shape[1]:
        raise ValueError(f"value dim {values.data.shape[1]} != attention input dim {params['W'].data.shape[1]}")
    projected = ad.tanh(ad.add(ad.matmul(values, transpose(params["W"])), params["b"]))
    scores = ad.matmul(projected, params["u"])
    weights = ad.softmax(scores)
    return ad.matmul(weights, values)


def transpose(a: Tensor) -> Tensor:
    return Tensor(a.data.T, _parents=(a,), _vjp=lambda g: (g.T,))


def dense(W: Tensor, b: Tensor, x: Tensor) -> Tensor:
    return ad.add(ad.matmul(W, x), b)


def dense_sigmoid(W: Tensor, b: Tensor, x: Tensor) -> Tensor:
    """Affine map squashed elementwise into (0, 1)."""
    return ad.sigmoid(dense(W, b, x))


def dropout(x: Tensor, rate: float, mode: str = "train",
            rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-rate); identity in eval mode."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if mode == "eval" or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an RNG")
    keep = rng.random(x.data.shape) >= rate
    mask = Tensor(keep / (1.0 - rate))
    return ad.mul(x, mask)
