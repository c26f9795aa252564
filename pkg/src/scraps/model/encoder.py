"""The two encoders: embedding/prenet + transformer backbone + integrator.

Phoneme sequences get BOS/EOS framing, token embedding (scaled by
sqrt(d_model)) and sinusoidal positions; mel inputs get a linear
projection of each frame plus the same position table. A pre-norm
transformer with key-padding masks produces per-position states, and the
integrator (a single-layer LSTM over real positions whose final state is
the output vector, or a projection of the last real state when ablated)
reduces them to one vector per item.

Forward functions return caches consumed by the matching *_bwd, which
accumulates parameter gradients into a plain dict.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..contrastive import EmbeddingBatch
from ..features import MelSpectrogram
from ..vocab import BOS_ID, EOS_ID, PAD_ID, PhonemeSequence
from .config import ModelConfig
from .params import accumulate, integrator_prefix
from . import layers as L


def pad_phonemes(seqs, config: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Pack sequences into (B, S) IDs with BOS/EOS framing and PAD fill."""
    if len(seqs) == 0:
        raise ValueError("empty batch")
    id_lists = []
    for i, seq in enumerate(seqs):
        ids = np.asarray(seq.ids if isinstance(seq, PhonemeSequence) else seq,
                         dtype=np.int64)
        if ids.size == 0:
            raise ValueError(f"sequence {i} is empty")
        if ids.size > config.max_phonemes:
            raise ValueError(
                f"sequence {i} has {ids.size} phonemes, exceeding "
                f"max_phonemes={config.max_phonemes}"
            )
        if ids.min() < 0 or ids.max() >= config.vocab_size:
            raise ValueError(f"sequence {i} contains IDs outside [0, {config.vocab_size})")
        id_lists.append(ids)
    lengths = np.array([len(ids) + 2 for ids in id_lists], dtype=np.int64)
    out = np.full((len(id_lists), int(lengths.max())), PAD_ID, dtype=np.int64)
    for i, ids in enumerate(id_lists):
        out[i, 0] = BOS_ID
        out[i, 1 : 1 + len(ids)] = ids
        out[i, 1 + len(ids)] = EOS_ID
    return out, lengths


def pad_mels(mels, config: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Pack mels into (B, F, n_mels) with zero-padded tails."""
    if len(mels) == 0:
        raise ValueError("empty batch")
    arrays = []
    for i, mel in enumerate(mels):
        if isinstance(mel, MelSpectrogram):
            if not mel.standardized:
                raise ValueError(f"mel {i} is not standardized")
            data = mel.data
        else:
            data = np.asarray(mel)
        if data.ndim != 2 or data.shape[1] != config.n_mels:
            raise ValueError(
                f"mel {i} has shape {data.shape}, expected (frames, {config.n_mels})"
            )
        if data.shape[0] < 1:
            raise ValueError(f"mel {i} has no frames")
        if data.shape[0] > config.max_frames:
            raise ValueError(
                f"mel {i} has {data.shape[0]} frames, exceeding "
                f"max_frames={config.max_frames}"
            )
        arrays.append(data.astype(config.np_dtype))
    lengths = np.array([a.shape[0] for a in arrays], dtype=np.int64)
    out = np.zeros((len(arrays), int(lengths.max()), config.n_mels), config.np_dtype)
    for i, a in enumerate(arrays):
        out[i, : a.shape[0]] = a
    return out, lengths


def _length_mask(lengths: np.ndarray, n_pos: int, dtype) -> np.ndarray:
    return (np.arange(n_pos)[None, :] < lengths[:, None]).astype(dtype)


def _backbone_fwd(x, key_mask, params, prefix, config, train, rng):
    bias = L.key_padding_bias(key_mask, x.dtype)
    blocks = []
    for i in range(config.n_layers):
        p = f"{prefix}.l{i}"
        h1, c_ln1 = L.layernorm_fwd(x, params[f"{p}.ln1.g"], params[f"{p}.ln1.b"])
        att, c_att = L.mha_fwd(
            h1, bias,
            params[f"{p}.attn.Wq"], params[f"{p}.attn.bq"],
            params[f"{p}.attn.Wk"], params[f"{p}.attn.bk"],
            params[f"{p}.attn.Wv"], params[f"{p}.attn.bv"],
            params[f"{p}.attn.Wo"], params[f"{p}.attn.bo"],
            config.n_heads, config.dropout, rng, train,
        )
        att, m1 = L.dropout_fwd(att, config.dropout, rng, train)
        x = x + att
        h2, c_ln2 = L.layernorm_fwd(x, params[f"{p}.ln2.g"], params[f"{p}.ln2.b"])
        ff, c_ffn = L.ffn_fwd(
            h2,
            params[f"{p}.ffn.W1"], params[f"{p}.ffn.b1"],
            params[f"{p}.ffn.W2"], params[f"{p}.ffn.b2"],
        )
        ff, m2 = L.dropout_fwd(ff, config.dropout, rng, train)
        x = x + ff
        blocks.append((c_ln1, c_att, m1, c_ln2, c_ffn, m2))
    y, c_lnf = L.layernorm_fwd(x, params[f"{prefix}.lnf.g"], params[f"{prefix}.lnf.b"])
    return y, (blocks, c_lnf)


def _backbone_bwd(dy, cache, params, prefix, config, grads):
    blocks, c_lnf = cache
    dx, dg, db = L.layernorm_bwd(dy, c_lnf)
    accumulate(grads, f"{prefix}.lnf.g", dg)
    accumulate(grads, f"{prefix}.lnf.b", db)
    for i in range(config.n_layers - 1, -1, -1):
        p = f"{prefix}.l{i}"
        c_ln1, c_att, m1, c_ln2, c_ffn, m2 = blocks[i]
        dff = L.dropout_bwd(dx, m2)
        dh2, (dW1, db1, dW2, db2) = L.ffn_bwd(dff, c_ffn)
        accumulate(grads, f"{p}.ffn.W1", dW1)
        accumulate(grads, f"{p}.ffn.b1", db1)
        accumulate(grads, f"{p}.ffn.W2", dW2)
        accumulate(grads, f"{p}.ffn.b2", db2)
        dln2, dg2, db2n = L.layernorm_bwd(dh2, c_ln2)
        accumulate(grads, f"{p}.ln2.g", dg2)
        accumulate(grads, f"{p}.ln2.b", db2n)
        dx = dx + dln2
        datt = L.dropout_bwd(dx, m1)
        dh1, attg = L.mha_bwd(datt, c_att, config.n_heads)
        for name, g in zip(
            ("Wq", "bq", "Wk", "bk", "Wv", "bv", "Wo", "bo"), attg
        ):
            accumulate(grads, f"{p}.attn.{name}", g)
        dln1, dg1, db1n = L.layernorm_bwd(dh1, c_ln1)
        accumulate(grads, f"{p}.ln1.g", dg1)
        accumulate(grads, f"{p}.ln1.b", db1n)
        dx = dx + dln1
    return dx


def _integrate_fwd(states, key_mask, lengths, params, config, side):
    pfx = integrator_prefix(config, side)
    if config.use_integrator:
        u, c_in = L.linear_fwd(states, params[f"{pfx}.in.W"], params[f"{pfx}.in.b"])
        x_t = np.ascontiguousarray(u.transpose(1, 0, 2))
        mask_t = np.ascontiguousarray(key_mask.T)
        h_last, c_lstm = kernels.lstm_forward(
            x_t, mask_t,
            params[f"{pfx}.lstm.Wx"], params[f"{pfx}.lstm.Wh"], params[f"{pfx}.lstm.b"],
        )
        return h_last, (pfx, c_in, c_lstm, None)
    last = states[np.arange(states.shape[0]), lengths - 1]
    out, c_out = L.linear_fwd(last, params[f"{pfx}.out.W"], params[f"{pfx}.out.b"])
    return out, (pfx, c_out, None, (states.shape, lengths))


def _integrate_bwd(d_emb, cache, config, grads):
    pfx, c_lin, c_lstm, c_last = cache
    if config.use_integrator:
        dx_t, dWx, dWh, db = kernels.lstm_backward(d_emb, c_lstm)
        accumulate(grads, f"{pfx}.lstm.Wx", dWx)
        accumulate(grads, f"{pfx}.lstm.Wh", dWh)
        accumulate(grads, f"{pfx}.lstm.b", db)
        du = dx_t.transpose(1, 0, 2)
        dstates, dW, dbi = L.linear_bwd(du, c_lin)
        accumulate(grads, f"{pfx}.in.W", dW)
        accumulate(grads, f"{pfx}.in.b", dbi)
        return dstates
    dlast, dW, dbo = L.linear_bwd(d_emb, c_lin)
    accumulate(grads, f"{pfx}.out.W", dW)
    accumulate(grads, f"{pfx}.out.b", dbo)
    shape, lengths = c_last
    dstates = np.zeros(shape, d_emb.dtype)
    dstates[np.arange(shape[0]), lengths - 1] = dlast
    return dstates


def phonetic_states_fwd(ids, lengths, params, config, train=False, rng=None):
    """Per-position backbone states for padded ID batch (BOS/EOS included)."""
    dm = config.d_model
    scale = np.asarray(np.sqrt(dm), config.np_dtype)
    emb = params["phon.embed"][ids] * scale
    x = emb + L.sinusoidal_positions(ids.shape[1], dm, emb.dtype)
    x, m_in = L.dropout_fwd(x, config.dropout, rng, train)
    key_mask = _length_mask(lengths, ids.shape[1], x.dtype)
    y, c_bb = _backbone_fwd(x, key_mask, params, "phon", config, train, rng)
    return y, key_mask, (ids, scale, m_in, c_bb)


def phonetic_states_bwd(dy, cache, params, config, grads):
    ids, scale, m_in, c_bb = cache
    dx = _backbone_bwd(dy, c_bb, params, "phon", config, grads)
    dx = L.dropout_bwd(dx, m_in)
    dtable = np.zeros_like(params["phon.embed"])
    np.add.at(dtable, ids, dx * scale)
    accumulate(grads, "phon.embed", dtable)


def acoustic_states_fwd(mel, lengths, params, config, train=False, rng=None):
    """Per-position backbone states for a padded (B, F, n_mels) batch."""
    x, c_proj = L.linear_fwd(mel, params["acou.proj.W"], params["acou.proj.b"])
    x = x + L.sinusoidal_positions(mel.shape[1], config.d_model, x.dtype)
    x, m_in = L.dropout_fwd(x, config.dropout, rng, train)
    key_mask = _length_mask(lengths, mel.shape[1], x.dtype)
    y, c_bb = _backbone_fwd(x, key_mask, params, "acou", config, train, rng)
    return y, key_mask, (c_proj, m_in, c_bb)


def acoustic_states_bwd(dy, cache, params, config, grads):
    c_proj, m_in, c_bb = cache
    dx = _backbone_bwd(dy, c_bb, params, "acou", config, grads)
    dx = L.dropout_bwd(dx, m_in)
    _, dW, db = L.linear_bwd(dx, c_proj)
    accumulate(grads, "acou.proj.W", dW)
    accumulate(grads, "acou.proj.b", db)


def encode_phonemes_fwd(ids, lengths, params, config, train=False, rng=None):
    states, key_mask, c_states = phonetic_states_fwd(
        ids, lengths, params, config, train, rng
    )
    emb, c_integ = _integrate_fwd(states, key_mask, lengths, params, config, "phon")
    c_norm = None
    if config.normalize_embeddings:
        emb, c_norm = L.l2_normalize_fwd(emb)
    return emb, (c_states, c_integ, c_norm)


def encode_phonemes_bwd(d_emb, cache, params, config, grads):
    c_states, c_integ, c_norm = cache
    if c_norm is not None:
        d_emb = L.l2_normalize_bwd(d_emb, c_norm)
    dstates = _integrate_bwd(d_emb, c_integ, config, grads)
    phonetic_states_bwd(dstates, c_states, params, config, grads)


def encode_mel_fwd(mel, lengths, params, config, train=False, rng=None):
    states, key_mask, c_states = acoustic_states_fwd(
        mel, lengths, params, config, train, rng
    )
    emb, c_integ = _integrate_fwd(states, key_mask, lengths, params, config, "acou")
    c_norm = None
    if config.normalize_embeddings:
        emb, c_norm = L.l2_normalize_fwd(emb)
    return emb, (c_states, c_integ, c_norm)


def encode_mel_bwd(d_emb, cache, params, config, grads):
    c_states, c_integ, c_norm = cache
    if c_norm is not None:
        d_emb = L.l2_normalize_bwd(d_emb, c_norm)
    dstates = _integrate_bwd(d_emb, c_integ, config, grads)
    acoustic_states_bwd(dstates, c_states, params, config, grads)


def encode_phonemes(seqs, params, config, mode="eval", rng=None) -> EmbeddingBatch:
    """Encode a batch of phoneme sequences into vectors (rows match input order)."""
    train = _check_mode(mode, rng)
    ids, lengths = pad_phonemes(seqs, config)
    emb, _ = encode_phonemes_fwd(ids, lengths, params, config, train, rng)
    return EmbeddingBatch(emb, "phonetic")


def encode_mel(mels, params, config, mode="eval", rng=None) -> EmbeddingBatch:
    """Encode a batch of standardized mel spectrograms into vectors."""
    train = _check_mode(mode, rng)
    mel, lengths = pad_mels(mels, config)
    emb, _ = encode_mel_fwd(mel, lengths, params, config, train, rng)
    return EmbeddingBatch(emb, "acoustic")


def _check_mode(mode: str, rng) -> bool:
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "train" and rng is None:
        raise ValueError("train mode requires an rng for dropout")
    return mode == "train"


def integrate(hidden, params, config, side="phonetic") -> np.ndarray:
    """Reduce one (L, d_model) state sequence to a single output vector."""
    hidden = np.asarray(hidden, config.np_dtype)
    if hidden.ndim != 2 or hidden.shape[0] < 1:
        raise ValueError(f"hidden must be (L >= 1, d_model), got {hidden.shape}")
    key = {"phonetic": "phon", "acoustic": "acou"}.get(side, side)
    if key not in ("phon", "acou"):
        raise ValueError(f"unknown side {side!r}")
    lengths = np.array([hidden.shape[0]], dtype=np.int64)
    mask = np.ones((1, hidden.shape[0]), hidden.dtype)
    emb, _ = _integrate_fwd(hidden[None], mask, lengths, params, config, key)
    return emb[0]
