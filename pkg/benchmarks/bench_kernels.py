#!/usr/bin/env python3
"""Benchmark the compiled recurrent kernels against the NumPy fallback.

Runs the fused GRU/LSTM sequence forward+backward at document-scale sizes
under both backends and prints a timing table.  The compiled module must be
built (pip install -e .) for the comparison column to appear.

    python3 benchmarks/bench_kernels.py --timesteps 512 2048 --hidden 64 --repeats 5
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lexsem.nn import kernels as K
from lexsem.nn.kernels import PYTHON_KERNELS

try:
    from lexsem.nn import _kernels as compiled
except ImportError:
    compiled = None


def _weights(rng, kind, d, H):
    n = 3 if kind == "gru" else 4
    return ([rng.normal(size=(H, d)) * 0.3 for _ in range(n)]
            + [rng.normal(size=(H, H)) * 0.3 for _ in range(n)]
            + [rng.normal(size=H) * 0.1 for _ in range(n)])


def _run_once(impl, kind, x, weights, dh):
    n_mats = 6 if kind == "gru" else 8
    h, cache = impl[f"{kind}_forward"](x, *weights)
    impl[f"{kind}_backward"](dh, cache, *weights[:n_mats])
    return h


def _time(impl, kind, x, weights, dh, repeats):
    _run_once(impl, kind, x, weights, dh)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        _run_once(impl, kind, x, weights, dh)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--timesteps", type=int, nargs="+", default=[128, 512, 2048])
    parser.add_argument("--input-dim", type=int, default=64)
    parser.add_argument("--hidden", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    compiled_impl = None
    if compiled is not None:
        compiled_impl = {
            "gru_forward": compiled.gru_forward, "gru_backward": compiled.gru_backward,
            "lstm_forward": compiled.lstm_forward, "lstm_backward": compiled.lstm_backward,
        }
    print(f"active backend: {K.ACTIVE_BACKEND}   input dim {args.input_dim}, hidden {args.hidden}")
    header = f"{'cell':6s} {'T':>6s} {'numpy (ms)':>12s} {'cython (ms)':>12s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for kind in ("gru", "lstm"):
        weights = _weights(rng, kind, args.input_dim, args.hidden)
        for T in args.timesteps:
            x = rng.normal(size=(T, args.input_dim))
            dh = rng.normal(size=(T, args.hidden))
            py = _time(PYTHON_KERNELS, kind, x, weights, dh, args.repeats)
            if compiled_impl is not None:
                cy = _time(compiled_impl, kind, x, weights, dh, args.repeats)
                h_py = _run_once(PYTHON_KERNELS, kind, x, weights, dh)
                h_cy = _run_once(compiled_impl, kind, x, weights, dh)
                drift = float(np.abs(h_py - h_cy).max())
                assert drift < 1e-10, f"backend disagreement: {drift}"
                print(f"{kind:6s} {T:6d} {py * 1e3:12.2f} {cy * 1e3:12.2f} {py / cy:7.1f}x")
            else:
                print(f"{kind:6s} {T:6d} {py * 1e3:12.2f} {'n/a':>12s} {'n/a':>8s}")


if __name__ == "__main__":
    main()
