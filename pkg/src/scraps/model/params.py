"""Parameter schema, initialization, and gradient-dict helpers.

Parameters live in a flat {name: ndarray} dict. Integrator parameters
are stored once under the "integ." prefix when share_integrator is on,
so both encoders read (and accumulate gradients into) the same arrays.
"""

from __future__ import annotations

import numpy as np

from .config import ModelConfig

SIDES = ("phon", "acou")


def integrator_prefix(config: ModelConfig, side: str) -> str:
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")
    return "integ" if config.share_integrator else f"{side}_integ"


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape map covering every trainable array."""
    dm, dff = config.d_model, 4 * config.d_model
    de = config.d_embed
    shapes: dict[str, tuple[int, ...]] = {}
    shapes["phon.embed"] = (config.vocab_size, dm)
    shapes["acou.proj.W"] = (config.n_mels, dm)
    shapes["acou.proj.b"] = (dm,)
    for side in SIDES:
        for i in range(config.n_layers):
            p = f"{side}.l{i}"
            shapes[f"{p}.ln1.g"] = (dm,)
            shapes[f"{p}.ln1.b"] = (dm,)
            for w in ("q", "k", "v", "o"):
                shapes[f"{p}.attn.W{w}"] = (dm, dm)
                shapes[f"{p}.attn.b{w}"] = (dm,)
            shapes[f"{p}.ln2.g"] = (dm,)
            shapes[f"{p}.ln2.b"] = (dm,)
            shapes[f"{p}.ffn.W1"] = (dm, dff)
            shapes[f"{p}.ffn.b1"] = (dff,)
            shapes[f"{p}.ffn.W2"] = (dff, dm)
            shapes[f"{p}.ffn.b2"] = (dm,)
        shapes[f"{side}.lnf.g"] = (dm,)
        shapes[f"{side}.lnf.b"] = (dm,)
    prefixes = (
        ("integ",) if config.share_integrator else ("phon_integ", "acou_integ")
    )
    for pfx in prefixes:
        if config.use_integrator:
            shapes[f"{pfx}.in.W"] = (dm, dm)
            shapes[f"{pfx}.in.b"] = (dm,)
            shapes[f"{pfx}.lstm.Wx"] = (dm, 4 * de)
            shapes[f"{pfx}.lstm.Wh"] = (de, 4 * de)
            shapes[f"{pfx}.lstm.b"] = (4 * de,)
        else:
            shapes[f"{pfx}.out.W"] = (dm, de)
            shapes[f"{pfx}.out.b"] = (de,)
    return shapes


def init_params(config: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Xavier-uniform matrices, zero biases, N(0, d_model^-0.5) embeddings,
    unit layer-norm gains."""
    dtype = config.np_dtype
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if name == "phon.embed":
            arr = rng.normal(0.0, config.d_model ** -0.5, shape)
        elif leaf == "g":
            arr = np.ones(shape)
        elif leaf.startswith("b"):
            arr = np.zeros(shape)
        else:
            fan_in, fan_out = shape[0], shape[1]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            arr = rng.uniform(-limit, limit, shape)
        params[name] = np.ascontiguousarray(arr, dtype=dtype)
    return params


def zero_grads_like(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def accumulate(grads: dict[str, np.ndarray], name: str, value: np.ndarray) -> None:
    if name in grads:
        grads[name] += value
    else:
        grads[name] = value


def merge_grads(*grad_dicts: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for gd in grad_dicts:
        for k, v in gd.items():
            accumulate(out, k, v)
    return out
