"""Reverse-mode automatic differentiation over NumPy arrays.

Each operation returns a new :class:`Tensor` carrying its parents and a
vector-Jacobian-product closure; ``Tensor.backward()`` walks the recorded
graph in reverse topological order and accumulates gradients into ``.grad``.
Arrays are float64: the gradient checks need the headroom, and the fused
recurrent kernels (see :mod:`lexsem.nn.kernels`) keep graphs small enough
that full precision costs little.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

DTYPE = np.float64


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x)
    ex = np.exp(shifted)
    return ex / ex.sum()


class Tensor:
    """Node in a dynamically built computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_vjp")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: str | None = None,
        _parents: tuple["Tensor", ...] = (),
        _vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None,
    ):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.name = name
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``.grad``."""
        if seed is None:
            if self.data.ndim != 0:
                raise ValueError("backward() needs a scalar root or an explicit seed")
            seed = np.ones((), dtype=DTYPE)
        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.asarray(seed, dtype=DTYPE)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is None:
                if node.requires_grad:
                    node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar -------------------------------------------------------

    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other)))

    def __rsub__(self, other):
        return add(_as_tensor(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _topological_order(root: Tensor) -> list[Tensor]:
    """Iterative DFS post-order, reversed: root first."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))
    order.reverse()
    return order


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# Primitive operations

def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data
    return Tensor(out, _parents=(a, b),
                  _vjp=lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data
    return Tensor(out, _parents=(a, b),
                  _vjp=lambda g: (_unbroadcast(g * b.data, a.data.shape),
                                  _unbroadcast(g * a.data, b.data.shape)))


def neg(a: Tensor) -> Tensor:
    return Tensor(-a.data, _parents=(a,), _vjp=lambda g: (-g,))


def scale(a: Tensor, c: float) -> Tensor:
    return Tensor(a.data * c, _parents=(a,), _vjp=lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product covering the 2d@2d, 2d@1d and 1d@2d cases."""
    ad, bd = a.data, b.data
    out = ad @ bd

    if ad.ndim == 2 and bd.ndim == 2:
        def vjp(g):
            return g @ bd.T, ad.T @ g
    elif ad.ndim == 2 and bd.ndim == 1:
        def vjp(g):
            return np.outer(g, bd), ad.T @ g
    elif ad.ndim == 1 and bd.ndim == 2:
        def vjp(g):
            return bd @ g, np.outer(ad, g)
    else:  # 1d @ 1d dot product
        def vjp(g):
            return g * bd, g * ad

    return Tensor(out, _parents=(a, b), _vjp=vjp)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return Tensor(out, _parents=(a,), _vjp=lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)
    return Tensor(out, _parents=(a,), _vjp=lambda g: (g * out * (1.0 - out),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor(np.where(mask, a.data, 0.0), _parents=(a,), _vjp=lambda g: (g * mask,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor(out, _parents=(a,), _vjp=lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return Tensor(np.log(a.data), _parents=(a,), _vjp=lambda g: (g / a.data,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only where the input is strictly inside."""
    inside = (a.data > lo) & (a.data < hi)
    return Tensor(np.clip(a.data, lo, hi), _parents=(a,), _vjp=lambda g: (g * inside,))


def total(a: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    return Tensor(a.data.sum(), _parents=(a,),
                  _vjp=lambda g: (np.full(a.data.shape, g, dtype=DTYPE),))


def mean_rows(a: Tensor) -> Tensor:
    """Mean over axis 0 of a (T, D) matrix."""
    t = a.data.shape[0]
    return Tensor(a.data.mean(axis=0), _parents=(a,),
                  _vjp=lambda g: (np.repeat((g / t).reshape(1, -1), t, axis=0),))


def max_rows(a: Tensor) -> Tensor:
    """Elementwise maximum over axis 0 of a (T, D) matrix.

    Gradient routes to the first maximal row per column (ties take the
    earliest timestep).
    """
    if a.data.shape[0] == 0:
        raise ValueError("max over an empty sequence")
    idx = np.argmax(a.data, axis=0)
    out = a.data[idx, np.arange(a.data.shape[1])]

    def vjp(g):
        grad = np.zeros_like(a.data)
        grad[idx, np.arange(a.data.shape[1])] = g
        return (grad,)

    return Tensor(out, _parents=(a,), _vjp=vjp)


def softmax(a: Tensor) -> Tensor:
    """Softmax of a 1-d score vector, max-shifted for stability."""
    out = _softmax(a.data)
    return Tensor(out, _parents=(a,), _vjp=lambda g: (out * (g - np.dot(g, out)),))


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack 1-d tensors as rows, and/or concatenate 2-d tensors, along axis 0."""
    mats = [p.data.reshape(1, -1) if p.data.ndim == 1 else p.data for p in parts]
    sizes = [m.shape[0] for m in mats]
    out = np.concatenate(mats, axis=0)

    def vjp(g):
        grads = []
        offset = 0
        for p, rows in zip(parts, sizes):
            piece = g[offset : offset + rows]
            grads.append(piece[0] if p.data.ndim == 1 else piece)
            offset += rows
        return grads

    return Tensor(out, _parents=tuple(parts), _vjp=vjp)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two (T, *) matrices along axis 1."""
    na = a.data.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)
    return Tensor(out, _parents=(a, b), _vjp=lambda g: (g[:, :na], g[:, na:]))


def flip_rows(a: Tensor) -> Tensor:
    return Tensor(a.data[::-1], _parents=(a,), _vjp=lambda g: (g[::-1],))


def row(a: Tensor, i: int) -> Tensor:
    def vjp(g):
        grad = np.zeros_like(a.data)
        grad[i] = g
        return (grad,)

    return Tensor(a.data[i], _parents=(a,), _vjp=vjp)
