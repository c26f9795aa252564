"""Minibatch contrastive training: Adam, seeded batching, checkpoints, resume.

Determinism contract: given (config, seed) the whole run is a pure
function — parameter init and dropout draw from one generator whose
state is checkpointed, and each epoch's batch order is derived from
(seed, epoch) alone, so a resumed run replays the exact trajectory of an
uninterrupted one.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .checkpoint import read_container, write_container
from .contrastive import ScoreMatrix, contrastive_loss_and_grad
from .corpus import CorpusData, load_corpus
from .errors import CheckpointError, TrainingDivergedError
from .model.config import ModelConfig
from .model.encoder import (
    encode_mel_bwd,
    encode_mel_fwd,
    encode_phonemes_bwd,
    encode_phonemes_fwd,
    pad_mels,
    pad_phonemes,
)
from .model.params import init_params

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    train_manifest: str = ""
    dev_manifest: str = ""
    checkpoint_dir: str = "checkpoints"
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    max_steps: int = 5000
    eval_every: int = 500
    seed: int = 0
    grad_clip: float | None = None  # off by default
    weight_decay: float = 0.0       # off by default

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (contrastive loss needs negatives)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")

    def to_dict(self) -> dict:
        obj = {k: getattr(self, k) for k in self.__dataclass_fields__}
        obj["model"] = self.model.to_dict()
        return obj

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        obj["model"] = ModelConfig.from_dict(obj["model"])
        return cls(**obj)


@dataclass
class TrainState:
    config: TrainConfig
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    step: int
    rng: np.random.Generator


@dataclass
class Batch:
    ids: np.ndarray        # (B, S) int64, BOS/EOS framed, PAD filled
    phon_lengths: np.ndarray
    mel: np.ndarray        # (B, F, n_mels) model dtype
    mel_lengths: np.ndarray
    indices: np.ndarray    # corpus rows; pair i is (phonemes[i], mel[i])


def init_state(config: TrainConfig) -> TrainState:
    rng = np.random.default_rng(config.seed)
    params = init_params(config.model, rng)
    zeros = {k: np.zeros_like(v) for k, v in params.items()}
    return TrainState(
        config=config,
        params=params,
        adam_m=zeros,
        adam_v={k: np.zeros_like(v) for k, v in params.items()},
        step=0,
        rng=rng,
    )


def epoch_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1, np.uint64)[0])


def _epoch_order(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(n)


def _build_batch(corpus: CorpusData, idx: np.ndarray, model: ModelConfig) -> Batch:
    ids, plen = pad_phonemes([corpus.phonemes[i] for i in idx], model)
    mel, mlen = pad_mels([corpus.mels[i] for i in idx], model)
    return Batch(ids, plen, mel, mlen, idx)


def make_batches(corpus: CorpusData, model: ModelConfig, batch_size: int, epoch_seed: int):
    """Seeded shuffle, full batches only; yields matched phoneme/mel pairs."""
    n = len(corpus)
    if n < batch_size:
        raise ValueError(f"corpus has {n} entries, fewer than batch_size={batch_size}")
    order = _epoch_order(n, epoch_seed)
    for k in range(n // batch_size):
        yield _build_batch(corpus, order[k * batch_size : (k + 1) * batch_size], model)


def batch_loss_and_grads(
    params: dict, model: ModelConfig, batch: Batch, rng, train: bool = True
) -> tuple[float, dict[str, np.ndarray]]:
    """Forward both encoders, score, loss, and full backward pass."""
    t_emb, c_phon = encode_phonemes_fwd(
        batch.ids, batch.phon_lengths, params, model, train, rng
    )
    a_emb, c_mel = encode_mel_fwd(
        batch.mel, batch.mel_lengths, params, model, train, rng
    )
    scores = ScoreMatrix(t_emb @ a_emb.T, model.temperature)
    loss, d_logits = contrastive_loss_and_grad(scores)
    d_logits = d_logits.astype(t_emb.dtype)
    d_t = d_logits @ a_emb
    d_a = d_logits.T @ t_emb
    grads: dict[str, np.ndarray] = {}
    encode_phonemes_bwd(d_t, c_phon, params, model, grads)
    encode_mel_bwd(d_a, c_mel, params, model, grads)
    return loss, grads


def _clip_grads(grads: dict[str, np.ndarray], max_norm: float) -> None:
    total = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale


def adam_update(state: TrainState, grads: dict[str, np.ndarray]) -> None:
    cfg = state.config
    t = state.step + 1
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for name, p in state.params.items():
        g = grads[name]
        m = state.adam_m[name]
        v = state.adam_v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        if cfg.weight_decay:
            update = update + cfg.weight_decay * p
        p -= cfg.lr * update


def train_step(state: TrainState, batch: Batch) -> float:
    loss, grads = batch_loss_and_grads(
        state.params, state.config.model, batch, state.rng, train=True
    )
    if not np.isfinite(loss):
        raise TrainingDivergedError(
            f"non-finite loss {loss!r} at step {state.step + 1}"
        )
    if state.config.grad_clip is not None:
        _clip_grads(grads, state.config.grad_clip)
    adam_update(state, grads)
    state.step += 1
    return loss


def _check_finite(state: TrainState) -> None:
    for group in (state.params, state.adam_m, state.adam_v):
        for name, arr in group.items():
            if not np.all(np.isfinite(arr)):
                raise TrainingDivergedError(
                    f"non-finite values in {name!r} at step {state.step}"
                )


def _dev_auc(state: TrainState, dev: CorpusData, chunk: int = 128) -> float:
    from .evaluation import pooled_chunk_probs
    from .metrics import auc_roc

    pos, neg = pooled_chunk_probs(
        state.params, state.config.model, dev.phonemes, dev.mels, chunk
    )
    return auc_roc(pos, neg)


def fit(
    config: TrainConfig,
    resume_from=None,
    train_corpus: CorpusData | None = None,
    dev_corpus: CorpusData | None = None,
) -> tuple[TrainState, dict]:
    """Run training to max_steps with periodic dev evaluation and checkpoints.

    Returns (final state, history) where history carries the per-step
    losses of this invocation and the dev-eval records.
    """
    if train_corpus is None:
        train_corpus = load_corpus(config.train_manifest)
    if dev_corpus is None:
        dev_corpus = load_corpus(config.dev_manifest, vocab=train_corpus.vocab)

    ckpt_dir = Path(config.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    if resume_from is not None:
        state = load_checkpoint(resume_from)
        state = TrainState(
            config=config, params=state.params, adam_m=state.adam_m,
            adam_v=state.adam_v, step=state.step, rng=state.rng,
        )
        log_mode = "a"
    else:
        state = init_state(config)
        log_mode = "w"

    spe = len(train_corpus) // config.batch_size
    if spe < 1:
        raise ValueError("training corpus smaller than one batch")
    losses: list[float] = []
    evals: list[dict] = []
    metrics_path = ckpt_dir / "metrics.jsonl"
    with open(metrics_path, log_mode, encoding="utf-8") as metrics:
        while state.step < config.max_steps:
            epoch = state.step // spe
            order = _epoch_order(len(train_corpus), epoch_seed(config.seed, epoch))
            for k in range(state.step % spe, spe):
                batch = _build_batch(
                    train_corpus,
                    order[k * config.batch_size : (k + 1) * config.batch_size],
                    config.model,
                )
                loss = train_step(state, batch)
                losses.append(loss)
                if state.step % config.eval_every == 0 or state.step == config.max_steps:
                    _check_finite(state)
                    auc = _dev_auc(state, dev_corpus)
                    record = {"step": state.step, "loss": loss, "dev_auc": auc}
                    evals.append(record)
                    metrics.write(json.dumps(record, sort_keys=True) + "\n")
                    metrics.flush()
                    save_checkpoint(state, ckpt_dir / f"step_{state.step:07d}.sckp")
                    log.info("step %d loss %.4f dev_auc %.4f", state.step, loss, auc)
                if state.step >= config.max_steps:
                    break
    final_path = ckpt_dir / "final.sckp"
    save_checkpoint(state, final_path)
    history = {"losses": losses, "evals": evals, "final_checkpoint": str(final_path)}
    return state, history


def _rng_state_to_json(rng: np.random.Generator) -> dict:
    st = rng.bit_generator.state
    return {
        "bit_generator": st["bit_generator"],
        "state": {k: str(v) for k, v in st["state"].items()},
        "has_uint32": st["has_uint32"],
        "uinteger": st["uinteger"],
    }


def _rng_state_from_json(obj: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    rng.bit_generator.state = {
        "bit_generator": obj["bit_generator"],
        "state": {k: int(v) for k, v in obj["state"].items()},
        "has_uint32": obj["has_uint32"],
        "uinteger": obj["uinteger"],
    }
    return rng


def save_checkpoint(state: TrainState, path) -> None:
    meta = {
        "kind": "checkpoint",
        "step": state.step,
        "train_config": state.config.to_dict(),
        "rng_state": _rng_state_to_json(state.rng),
    }
    blobs: dict[str, np.ndarray] = dict(state.params)
    for name, arr in state.adam_m.items():
        blobs[f"adam.m.{name}"] = arr
    for name, arr in state.adam_v.items():
        blobs[f"adam.v.{name}"] = arr
    write_container(path, meta, blobs)


def load_checkpoint(path) -> TrainState:
    meta, blobs = read_container(path)
    if meta.get("kind") != "checkpoint":
        raise CheckpointError(f"{path}: not a training checkpoint")
    config = TrainConfig.from_dict(meta["train_config"])
    dtype = config.model.np_dtype
    params, adam_m, adam_v = {}, {}, {}
    for name, arr in blobs.items():
        if name.startswith("adam.m."):
            adam_m[name[len("adam.m."):]] = arr.astype(dtype)
        elif name.startswith("adam.v."):
            adam_v[name[len("adam.v."):]] = arr.astype(dtype)
        else:
            params[name] = arr.astype(dtype)
    return TrainState(
        config=config,
        params=params,
        adam_m=adam_m,
        adam_v=adam_v,
        step=int(meta["step"]),
        rng=_rng_state_from_json(meta["rng_state"]),
    )


def desk_synth_config(seed: int = 0):
    from .corpus import SynthConfig

    return SynthConfig(
        vocab_size=40,
        n_utterances=2256,
        seq_len_range=(4, 10),
        frames_per_phoneme_range=(2, 4),
        noise_sigma=0.25,
        speaker_bias_sigma=0.1,
        seed=seed,
    )


def desk_model_config(**overrides) -> ModelConfig:
    base = dict(
        vocab_size=43,
        n_layers=2,
        n_heads=4,
        d_model=64,
        dropout=0.1,
        d_embed=128,
        max_phonemes=64,
        max_frames=128,
    )
    base.update(overrides)
    return ModelConfig(**base)


def desk_train_config(
    train_manifest, dev_manifest, checkpoint_dir, seed: int = 0, **overrides
) -> TrainConfig:
    model_overrides = overrides.pop("model_overrides", {})
    base = dict(
        model=desk_model_config(**model_overrides),
        train_manifest=str(train_manifest),
        dev_manifest=str(dev_manifest),
        checkpoint_dir=str(checkpoint_dir),
        batch_size=32,
        max_steps=5000,
        eval_every=500,
        seed=seed,
    )
    base.update(overrides)
    return TrainConfig(**base)


def replace_model(config: TrainConfig, **model_overrides) -> TrainConfig:
    return replace(config, model=replace(config.model, **model_overrides))
