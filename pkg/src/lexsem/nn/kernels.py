"""Fused recurrent sequence kernels with backend selection.

The per-timestep recurrence is the hot loop of the whole classifier: a
2,000-token document costs thousands of sequential cell steps per direction
and per level.  Two interchangeable backends implement the same math:

* ``python`` -- NumPy loops below, always available;
* ``cython`` -- compiled module :mod:`lexsem.nn._kernels`, built by setup.py.

The compiled backend is used when importable unless the environment variable
``LEXSEM_KERNELS=python`` forces the fallback.  ``ACTIVE_BACKEND`` names the
selection; ``benchmarks/bench_kernels.py`` compares the two.

Cell conventions (zero initial state h_0 = 0):

GRU:   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
       r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
       c_t = tanh(Wh x_t + Uh (r_t * h_{t-1}) + bh)
       h_t = (1 - z_t) * h_{t-1} + z_t * c_t

LSTM:  i, f, o = sigmoid gates; g_t = tanh(Wg x_t + Ug h_{t-1} + bg)
       cell_t = f_t * cell_{t-1} + i_t * g_t
       h_t = o_t * tanh(cell_t)
"""

from __future__ import annotations

import os

import numpy as np

from .autodiff import _sigmoid

GRU_GATES = ("z", "r", "h")
LSTM_GATES = ("i", "f", "o", "g")


# ---------------------------------------------------------------------------
# NumPy reference implementation

def _gru_forward_py(x, Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh):
    T = x.shape[0]
    H = bz.shape[0]
    h = np.zeros((T, H))
    z = np.zeros((T, H))
    r = np.zeros((T, H))
    c = np.zeros((T, H))
    hprev = np.zeros(H)
    for t in range(T):
        xt = x[t]
        z[t] = _sigmoid(Wz @ xt + Uz @ hprev + bz)
        r[t] = _sigmoid(Wr @ xt + Ur @ hprev + br)
        c[t] = np.tanh(Wh @ xt + Uh @ (r[t] * hprev) + bh)
        h[t] = (1.0 - z[t]) * hprev + z[t] * c[t]
        hprev = h[t]
    return h, (x, h, z, r, c)


def _gru_backward_py(dh, cache, Wz, Wr, Wh, Uz, Ur, Uh):
    x, h, z, r, c = cache
    T, H = h.shape
    dx = np.zeros_like(x)
    dWz = np.zeros_like(Wz)
    dWr = np.zeros_like(Wr)
    dWh = np.zeros_like(Wh)
    dUz = np.zeros_like(Uz)
    dUr = np.zeros_like(Ur)
    dUh = np.zeros_like(Uh)
    dbz = np.zeros(H)
    dbr = np.zeros(H)
    dbh = np.zeros(H)
    carry = np.zeros(H)
    for t in range(T - 1, -1, -1):
        hprev = h[t - 1] if t > 0 else np.zeros(H)
        delta = dh[t] + carry
        dz_pre = delta * (c[t] - hprev) * z[t] * (1.0 - z[t])
        dc_pre = delta * z[t] * (1.0 - c[t] * c[t])
        drh = Uh.T @ dc_pre                      # grad wrt (r_t * h_{t-1})
        dr_pre = drh * hprev * r[t] * (1.0 - r[t])
        carry = delta * (1.0 - z[t]) + Uz.T @ dz_pre + Ur.T @ dr_pre + drh * r[t]
        dx[t] = Wz.T @ dz_pre + Wr.T @ dr_pre + Wh.T @ dc_pre
        dWz += np.outer(dz_pre, x[t])
        dWr += np.outer(dr_pre, x[t])
        dWh += np.outer(dc_pre, x[t])
        dUz += np.outer(dz_pre, hprev)
        dUr += np.outer(dr_pre, hprev)
        dUh += np.outer(dc_pre, r[t] * hprev)
        dbz += dz_pre
        dbr += dr_pre
        dbh += dc_pre
    return dx, dWz, dWr, dWh, dUz, dUr, dUh, dbz, dbr, dbh


def _lstm_forward_py(x, Wi, Wf, Wo, Wg, Ui, Uf, Uo, Ug, bi, bf, bo, bg):
    T = x.shape[0]
    H = bi.shape[0]
    h = np.zeros((T, H))
    i = np.zeros((T, H))
    f = np.zeros((T, H))
    o = np.zeros((T, H))
    g = np.zeros((T, H))
    cell = np.zeros((T, H))
    hprev = np.zeros(H)
    cprev = np.zeros(H)
    for t in range(T):
        xt = x[t]
        i[t] = _sigmoid(Wi @ xt + Ui @ hprev + bi)
        f[t] = _sigmoid(Wf @ xt + Uf @ hprev + bf)
        o[t] = _sigmoid(Wo @ xt + Uo @ hprev + bo)
        g[t] = np.tanh(Wg @ xt + Ug @ hprev + bg)
        cell[t] = f[t] * cprev + i[t] * g[t]
        h[t] = o[t] * np.tanh(cell[t])
        hprev = h[t]
        cprev = cell[t]
    return h, (x, h, i, f, o, g, cell)


def _lstm_backward_py(dh, cache, Wi, Wf, Wo, Wg, Ui, Uf, Uo, Ug):
    x, h, i, f, o, g, cell = cache
    T, H = h.shape
    dx = np.zeros_like(x)
    dWi, dWf, dWo, dWg = (np.zeros_like(Wi) for _ in range(4))
    dUi, dUf, dUo, dUg = (np.zeros_like(Ui) for _ in range(4))
    dbi, dbf, dbo, dbg = (np.zeros(H) for _ in range(4))
    carry_h = np.zeros(H)
    carry_c = np.zeros(H)
    for t in range(T - 1, -1, -1):
        hprev = h[t - 1] if t > 0 else np.zeros(H)
        cprev = cell[t - 1] if t > 0 else np.zeros(H)
        delta = dh[t] + carry_h
        tc = np.tanh(cell[t])
        do_pre = delta * tc * o[t] * (1.0 - o[t])
        dc = carry_c + delta * o[t] * (1.0 - tc * tc)
        di_pre = dc * g[t] * i[t] * (1.0 - i[t])
        df_pre = dc * cprev * f[t] * (1.0 - f[t])
        dg_pre = dc * i[t] * (1.0 - g[t] * g[t])
        carry_c = dc * f[t]
        carry_h = Ui.T @ di_pre + Uf.T @ df_pre + Uo.T @ do_pre + Ug.T @ dg_pre
        dx[t] = Wi.T @ di_pre + Wf.T @ df_pre + Wo.T @ do_pre + Wg.T @ dg_pre
        dWi += np.outer(di_pre, x[t])
        dWf += np.outer(df_pre, x[t])
        dWo += np.outer(do_pre, x[t])
        dWg += np.outer(dg_pre, x[t])
        dUi += np.outer(di_pre, hprev)
        dUf += np.outer(df_pre, hprev)
        dUo += np.outer(do_pre, hprev)
        dUg += np.outer(dg_pre, hprev)
        dbi += di_pre
        dbf += df_pre
        dbo += do_pre
        dbg += dg_pre
    return dx, dWi, dWf, dWo, dWg, dUi, dUf, dUo, dUg, dbi, dbf, dbo, dbg


PYTHON_KERNELS = {
    "gru_forward": _gru_forward_py,
    "gru_backward": _gru_backward_py,
    "lstm_forward": _lstm_forward_py,
    "lstm_backward": _lstm_backward_py,
}


# ---------------------------------------------------------------------------
# Backend selection

def _select_backend():
    if os.environ.get("LEXSEM_KERNELS", "").lower() == "python":
        return "python", PYTHON_KERNELS
    try:
        from . import _kernels as compiled
    except ImportError:
        return "python", PYTHON_KERNELS
    return "cython", {
        "gru_forward": compiled.gru_forward,
        "gru_backward": compiled.gru_backward,
        "lstm_forward": compiled.lstm_forward,
        "lstm_backward": compiled.lstm_backward,
    }


ACTIVE_BACKEND, _IMPL = _select_backend()

gru_forward = _IMPL["gru_forward"]
gru_backward = _IMPL["gru_backward"]
lstm_forward = _IMPL["lstm_forward"]
lstm_backward = _IMPL["lstm_backward"]
