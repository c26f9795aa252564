"""LSTM integrator kernels with selectable backend.

The sequential time loops (forward state recursion, backward-in-time
gradient recursion) are the only hot paths numpy cannot express without
a Python-level loop; they run either as plain numpy loops or as numba
@njit kernels. Select with the SCRAPS_KERNELS environment variable
("numpy" | "numba") or set_backend(). The surrounding large matrix
products (input projection, dWx/dWh/dx) are single BLAS calls shared by
both backends.

Default is numpy: without SVML, numba lowers exp/tanh to scalar libm
calls and loses to numpy's SIMD ufuncs on the gate nonlinearities (see
benchmarks/bench_kernels.py for the comparison on your machine).

Gate layout along the 4H axis: input, forget, output, cell. Padded
steps (mask 0) carry hidden and cell state through unchanged, so the
state after the last real step is the final state.
"""

from __future__ import annotations

import logging
import os

import numpy as np

log = logging.getLogger(__name__)

_impl = None
_backend_name = ""


def available_backends() -> list[str]:
    names = ["numpy"]
    try:
        import numba  # noqa: F401

        names.append("numba")
    except ImportError:
        pass
    return names


def set_backend(name: str) -> None:
    global _impl, _backend_name
    if name == "numpy":
        from . import numpy_ops as mod
    elif name == "numba":
        from . import numba_ops as mod
    else:
        raise ValueError(f"unknown kernel backend {name!r} (use 'numpy' or 'numba')")
    _impl = mod
    _backend_name = name


def get_backend() -> str:
    return _backend_name


def _init_default() -> None:
    requested = os.environ.get("SCRAPS_KERNELS", "").strip().lower()
    if requested:
        set_backend(requested)
    else:
        set_backend("numpy")


def lstm_forward(x, mask, Wx, Wh, b):
    """Masked single-layer LSTM from zero state; returns last state + cache.

    x: (T, B, Din), mask: (T, B) in {0, 1} of x's dtype, Wx: (Din, 4H),
    Wh: (H, 4H), b: (4H,). Returns (h_last (B, H), cache for backward).
    """
    T, B, _ = x.shape
    H = Wh.shape[0]
    dtype = x.dtype
    xp = np.ascontiguousarray((x.reshape(T * B, -1) @ Wx + b).reshape(T, B, 4 * H))
    mask3 = np.ascontiguousarray(mask[:, :, None])
    hs = np.empty((T, B, H), dtype)
    cs = np.empty((T, B, H), dtype)
    gates = np.empty((T, B, 4 * H), dtype)
    tc = np.empty((T, B, H), dtype)
    _impl.lstm_loop_fwd(
        xp, mask3, np.ascontiguousarray(Wh), hs, cs, gates, tc, dtype.type(1.0)
    )
    cache = (x, mask3, Wx, Wh, hs, cs, gates, tc)
    return hs[-1].copy(), cache


def lstm_backward(d_hlast, cache):
    """Gradients of a scalar loss through lstm_forward's last state.

    Returns (dx (T, B, Din), dWx, dWh, db).
    """
    x, mask3, Wx, Wh, hs, cs, gates, tc = cache
    T, B, H = hs.shape
    dz = np.empty((T, B, 4 * H), x.dtype)
    _impl.lstm_loop_bwd(
        np.ascontiguousarray(d_hlast),
        mask3,
        np.ascontiguousarray(Wh.T),
        hs, cs, gates, tc,
        dz,
        x.dtype.type(1.0),
    )
    dz_flat = dz.reshape(T * B, 4 * H)
    dx = (dz_flat @ Wx.T).reshape(x.shape)
    dWx = x.reshape(T * B, -1).T @ dz_flat
    hs_prev = np.concatenate([np.zeros((1, B, H), x.dtype), hs[:-1]], axis=0)
    dWh = hs_prev.reshape(T * B, H).T @ dz_flat
    db = dz_flat.sum(axis=0)
    return dx, dWx, dWh, db


_init_default()
