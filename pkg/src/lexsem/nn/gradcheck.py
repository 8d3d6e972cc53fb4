"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .autodiff import Tensor


def numeric_gradient(build_loss: Callable[[], Tensor], param: Tensor, step: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar loss wrt every entry of ``param``.

    ``build_loss`` must rebuild the forward graph from the current parameter
    data on every call.
    """
    grad = np.zeros_like(param.data)
    flat = param.data.ravel()
    gflat = grad.ravel()
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + step
        up = build_loss().item()
        flat[idx] = orig - step
        down = build_loss().item()
        flat[idx] = orig
        gflat[idx] = (up - down) / (2.0 * step)
    return grad


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor); the floor keeps near-zero entries honest
    without letting finite-difference noise dominate."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def check_gradients(
    build_loss: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    step: float = 1e-5,
    tol: float = 1e-4,
) -> dict[str, float]:
    """Max relative error per parameter; raises AssertionError above ``tol``."""
    for p in params.values():
        p.zero_grad()
    build_loss().backward()
    report: dict[str, float] = {}
    for name, p in params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = numeric_gradient(build_loss, p, step)
        worst = float(relative_errors(analytic, numeric).max()) if analytic.size else 0.0
        report[name] = worst
        if worst > tol:
            raise AssertionError(f"gradient mismatch for {name}: max rel err {worst:.3e} > {tol:.1e}")
    return report
