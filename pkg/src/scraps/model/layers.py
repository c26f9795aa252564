"""Forward/backward layer primitives used by both encoders.

Each *_fwd returns (output, cache); the matching *_bwd consumes the
upstream gradient plus that cache and returns input and parameter
gradients. Shapes follow (batch, positions, features).
"""

from __future__ import annotations

import numpy as np

LN_EPS = 1e-5
MASK_BIAS = -1e9

_posenc_cache: dict[tuple[int, int, str], np.ndarray] = {}


def sinusoidal_positions(n_pos: int, dim: int, dtype) -> np.ndarray:
    """Fixed sin/cos position table, (n_pos, dim)."""
    key = (n_pos, dim, np.dtype(dtype).str)
    hit = _posenc_cache.get(key)
    if hit is not None:
        return hit
    pos = np.arange(n_pos, dtype=np.float64)[:, None]
    idx = np.arange(0, dim, 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, idx / dim)
    table = np.zeros((n_pos, dim))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles[:, : dim // 2])
    table = np.ascontiguousarray(table, dtype=dtype)
    _posenc_cache[key] = table
    return table


def linear_fwd(x: np.ndarray, W: np.ndarray, b: np.ndarray):
    return x @ W + b, (x, W)


def linear_bwd(dy: np.ndarray, cache):
    x, W = cache
    dx = dy @ W.T
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dx, x2.T @ dy2, dy2.sum(axis=0)


def layernorm_fwd(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + np.asarray(LN_EPS, x.dtype))
    xhat = xc * inv
    return g * xhat + b, (xhat, inv, g)


def layernorm_bwd(dy: np.ndarray, cache):
    xhat, inv, g = cache
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    axes = tuple(range(dy.ndim - 1))
    return dx, (dy * xhat).sum(axis=axes), dy.sum(axis=axes)


def dropout_fwd(x: np.ndarray, p: float, rng, train: bool):
    """Inverted dropout; identity (mask None) when eval or p == 0."""
    if not train or p <= 0.0:
        return x, None
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / np.asarray(1.0 - p, x.dtype)
    return x * keep, keep


def dropout_bwd(dy: np.ndarray, mask):
    return dy if mask is None else dy * mask


def ffn_fwd(x: np.ndarray, W1, b1, W2, b2):
    pre = x @ W1 + b1
    act = np.maximum(pre, 0.0)
    return act @ W2 + b2, (x, W1, W2, pre, act)


def ffn_bwd(dy: np.ndarray, cache):
    x, W1, W2, pre, act = cache
    act2 = act.reshape(-1, act.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dW2 = act2.T @ dy2
    db2 = dy2.sum(axis=0)
    dact = dy @ W2.T
    dpre = dact * (pre > 0)
    x2 = x.reshape(-1, x.shape[-1])
    dpre2 = dpre.reshape(-1, dpre.shape[-1])
    dW1 = x2.T @ dpre2
    db1 = dpre2.sum(axis=0)
    dx = dpre @ W1.T
    return dx, (dW1, db1, dW2, db2)


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    b, s, d = x.shape
    return x.reshape(b, s, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, s, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, s, h * dk)


def key_padding_bias(key_mask: np.ndarray, dtype) -> np.ndarray:
    """(B, S) 1/0 mask -> additive (B, 1, 1, S) bias with -1e9 on pads."""
    return ((1.0 - key_mask) * MASK_BIAS).astype(dtype)[:, None, None, :]


def mha_fwd(
    x: np.ndarray,
    key_bias: np.ndarray,
    Wq, bq, Wk, bk, Wv, bv, Wo, bo,
    n_heads: int,
    p_drop: float,
    rng,
    train: bool,
):
    q = _split_heads(x @ Wq + bq, n_heads)
    k = _split_heads(x @ Wk + bk, n_heads)
    v = _split_heads(x @ Wv + bv, n_heads)
    scale = np.asarray(1.0 / np.sqrt(q.shape[-1]), x.dtype)
    scores = q @ k.swapaxes(-1, -2) * scale + key_bias
    scores -= scores.max(axis=-1, keepdims=True)
    e = np.exp(scores)
    probs = e / e.sum(axis=-1, keepdims=True)
    probs_d, drop_mask = dropout_fwd(probs, p_drop, rng, train)
    ctx = _merge_heads(probs_d @ v)
    out = ctx @ Wo + bo
    cache = (x, q, k, v, probs, probs_d, drop_mask, ctx, scale, Wq, Wk, Wv, Wo)
    return out, cache


def mha_bwd(dy: np.ndarray, cache, n_heads: int):
    x, q, k, v, probs, probs_d, drop_mask, ctx, scale, Wq, Wk, Wv, Wo = cache
    dy2 = dy.reshape(-1, dy.shape[-1])
    dWo = ctx.reshape(-1, ctx.shape[-1]).T @ dy2
    dbo = dy2.sum(axis=0)
    dctx = _split_heads(dy @ Wo.T, n_heads)
    dprobs_d = dctx @ v.swapaxes(-1, -2)
    dv = probs_d.swapaxes(-1, -2) @ dctx
    dprobs = dropout_bwd(dprobs_d, drop_mask)
    dscores = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
    dscores = dscores * scale
    dq = dscores @ k
    dk = dscores.swapaxes(-1, -2) @ q
    dq_f = _merge_heads(dq)
    dk_f = _merge_heads(dk)
    dv_f = _merge_heads(dv)
    x2 = x.reshape(-1, x.shape[-1])
    grads = (
        x2.T @ dq_f.reshape(-1, dq_f.shape[-1]),
        dq_f.reshape(-1, dq_f.shape[-1]).sum(axis=0),
        x2.T @ dk_f.reshape(-1, dk_f.shape[-1]),
        dk_f.reshape(-1, dk_f.shape[-1]).sum(axis=0),
        x2.T @ dv_f.reshape(-1, dv_f.shape[-1]),
        dv_f.reshape(-1, dv_f.shape[-1]).sum(axis=0),
        dWo,
        dbo,
    )
    dx = dq_f @ Wq.T + dk_f @ Wk.T + dv_f @ Wv.T
    return dx, grads


def l2_normalize_fwd(x: np.ndarray, eps: float = 1e-12):
    norm = np.sqrt((x * x).sum(axis=-1, keepdims=True) + np.asarray(eps, x.dtype))
    y = x / norm
    return y, (y, norm)


def l2_normalize_bwd(dy: np.ndarray, cache):
    y, norm = cache
    return (dy - y * (dy * y).sum(axis=-1, keepdims=True)) / norm
