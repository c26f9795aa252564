"""Sensitivity/robustness sweeps, retrieval, pair scoring, length profiles.

Sensitivity follows the matched-pair protocol: score each clean pair,
corrupt one side, rescore, and count strict drops/lifts over raw
diagonal dot products. Robustness scores each chunk's full cross matrix,
row-softmaxes it, and pools diagonal (positive) versus off-diagonal
(negative) probabilities across chunks for AUC-ROC and EER.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .contrastive import softmax
from .corpus import CorpusData
from .corruption import METHODS, gaussian_noise, mix_spectrograms, substitute_phonemes
from .features import MelSpectrogram
from .metrics import auc_roc, binomial_ci, bootstrap_auc_ci, eer
from .metrics import drop_lift as _drop_lift
from .model.config import ModelConfig
from .model.encoder import encode_mel_fwd, encode_phonemes_fwd, pad_mels, pad_phonemes
from .vocab import PhonemeSequence, Vocabulary


@dataclass
class ReportRow:
    method: str
    amount: float
    n: int
    drop_pct: float | None = None
    drop_ci: float | None = None
    lift_pct: float | None = None
    lift_ci: float | None = None
    auc: float | None = None
    auc_ci: float | None = None
    eer: float | None = None


@dataclass
class EvalReport:
    rows: list[ReportRow]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"meta": self.meta, "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalReport":
        return cls([ReportRow(**r) for r in obj["rows"]], dict(obj["meta"]))


def params_fingerprint(params: dict[str, np.ndarray]) -> str:
    digest = hashlib.sha256()
    for name in sorted(params):
        digest.update(name.encode())
        digest.update(np.ascontiguousarray(params[name], dtype="<f4").tobytes())
    return digest.hexdigest()[:12]


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def embed_phonemes(params, model: ModelConfig, seqs, batch: int = 128) -> np.ndarray:
    out = []
    for i in range(0, len(seqs), batch):
        ids, lens = pad_phonemes(seqs[i : i + batch], model)
        emb, _ = encode_phonemes_fwd(ids, lens, params, model)
        out.append(emb)
    return np.concatenate(out, axis=0)


def embed_mels(params, model: ModelConfig, mels, batch: int = 128) -> np.ndarray:
    out = []
    for i in range(0, len(mels), batch):
        x, lens = pad_mels(mels[i : i + batch], model)
        emb, _ = encode_mel_fwd(x, lens, params, model)
        out.append(emb)
    return np.concatenate(out, axis=0)


def _sample_indices(n_total: int, n: int | None, seed: int) -> np.ndarray:
    if n is None or n >= n_total:
        n = n_total
    if n < 1:
        raise ValueError("need at least one evaluation item")
    rng = np.random.default_rng(_derived_seed(seed, 0xA11CE))
    return rng.permutation(n_total)[:n]


def _derangement(n: int, seed: int) -> np.ndarray:
    """Permutation of range(n) with no fixed points (n >= 2)."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    fixed = np.flatnonzero(perm == np.arange(n))
    if fixed.size == 1:
        j = (fixed[0] + 1) % n
        perm[fixed[0]], perm[j] = perm[j], perm[fixed[0]]
    elif fixed.size > 1:
        perm[fixed] = perm[np.roll(fixed, 1)]
    return perm


def _corrupt_phonemes(seqs, amount, vocab: Vocabulary, seed, tag):
    return [
        substitute_phonemes(
            PhonemeSequence(list(s.ids if isinstance(s, PhonemeSequence) else s)),
            amount,
            _derived_seed(seed, tag, j),
            vocab,
        )
        for j, s in enumerate(seqs)
    ]


def _corrupt_mels(mels, method, amount, seed, tag, partners=None):
    out = []
    for j, m in enumerate(mels):
        mel = MelSpectrogram(m, standardized=True)
        if method == "gaussian":
            out.append(gaussian_noise(mel, amount, _derived_seed(seed, tag, j)).data)
        else:
            other = MelSpectrogram(mels[partners[j]], standardized=True)
            out.append(mix_spectrograms(mel, other, amount).data)
    return out


def diagonal_scores(t_emb: np.ndarray, a_emb: np.ndarray) -> np.ndarray:
    return (t_emb * a_emb).sum(axis=1)


def sensitivity_sweep(
    params,
    model: ModelConfig,
    corpus: CorpusData,
    method: str,
    amounts,
    seed: int,
    n: int | None = None,
    meta: dict | None = None,
) -> EvalReport:
    """Drop/lift percentages of matched-pair raw scores per corruption amount."""
    if method not in METHODS:
        raise ValueError(f"unknown corruption method {method!r}")
    idx = _sample_indices(len(corpus), n, seed)
    seqs = [corpus.phonemes[i] for i in idx]
    mels = [corpus.mels[i] for i in idx]
    t0 = embed_phonemes(params, model, seqs)
    a0 = embed_mels(params, model, mels)
    s0 = diagonal_scores(t0, a0)
    n_eff = len(idx)
    rows = []
    for ai, amount in enumerate(amounts):
        if method == "substitute":
            t1 = embed_phonemes(
                params, model, _corrupt_phonemes(seqs, amount, corpus.vocab, seed, ai)
            )
            s1 = diagonal_scores(t1, a0)
        else:
            partners = (
                _derangement(n_eff, _derived_seed(seed, 0x317, ai))
                if method == "mix"
                else None
            )
            a1 = embed_mels(
                params, model, _corrupt_mels(mels, method, amount, seed, ai, partners)
            )
            s1 = diagonal_scores(t0, a1)
        drop, lift = _drop_lift(s0, s1)
        rows.append(
            ReportRow(
                method=method,
                amount=float(amount),
                n=n_eff,
                drop_pct=drop,
                drop_ci=100.0 * binomial_ci(drop / 100.0, n_eff),
                lift_pct=lift,
                lift_ci=100.0 * binomial_ci(lift / 100.0, n_eff),
            )
        )
    return EvalReport(rows, _sweep_meta(params, corpus, seed, n_eff, meta))


def _pool_probs(
    t_all: np.ndarray, a_all: np.ndarray, chunk: int, temperature: float
) -> tuple[np.ndarray, np.ndarray]:
    n = t_all.shape[0]
    pos_parts, neg_parts = [], []
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        if hi - lo < 2:
            break
        logits = t_all[lo:hi] @ a_all[lo:hi].T / temperature
        probs = softmax(logits.astype(np.float64), axis=1)
        b = hi - lo
        diag = np.eye(b, dtype=bool)
        pos_parts.append(probs[diag])
        neg_parts.append(probs[~diag])
    return np.concatenate(pos_parts), np.concatenate(neg_parts)


def pooled_chunk_probs(
    params, model: ModelConfig, seqs, mels, chunk: int = 128
) -> tuple[np.ndarray, np.ndarray]:
    """Clean pooled in-batch probabilities (robustness protocol at amount 0)."""
    t_all = embed_phonemes(params, model, list(seqs))
    a_all = embed_mels(params, model, list(mels))
    return _pool_probs(t_all, a_all, chunk, model.temperature)


def robustness_sweep(
    params,
    model: ModelConfig,
    corpus: CorpusData,
    method: str,
    amounts,
    seed: int,
    n: int | None = None,
    chunk: int = 128,
    bootstrap: int = 1000,
    meta: dict | None = None,
) -> EvalReport:
    """Pooled in-batch AUC-ROC and EER per corruption amount."""
    if method not in METHODS:
        raise ValueError(f"unknown corruption method {method!r}")
    if chunk < 2:
        raise ValueError("chunk must be >= 2")
    idx = _sample_indices(len(corpus), n, seed)
    seqs = [corpus.phonemes[i] for i in idx]
    mels = [corpus.mels[i] for i in idx]
    t0 = embed_phonemes(params, model, seqs)
    a0 = embed_mels(params, model, mels)
    n_eff = len(idx)
    rows = []
    for ai, amount in enumerate(amounts):
        if method == "substitute":
            t_all = embed_phonemes(
                params, model, _corrupt_phonemes(seqs, amount, corpus.vocab, seed, ai)
            )
            a_all = a0
        else:
            partners = None
            if method == "mix":
                # partner drawn within each chunk, mirroring in-batch mixing
                partners = np.arange(n_eff)
                for lo in range(0, n_eff, chunk):
                    hi = min(lo + chunk, n_eff)
                    if hi - lo < 2:
                        break
                    partners[lo:hi] = lo + _derangement(
                        hi - lo, _derived_seed(seed, 0x317, ai, lo)
                    )
            t_all = t0
            a_all = embed_mels(
                params, model, _corrupt_mels(mels, method, amount, seed, ai, partners)
            )
        pos, neg = _pool_probs(t_all, a_all, chunk, model.temperature)
        auc = auc_roc(pos, neg)
        rows.append(
            ReportRow(
                method=method,
                amount=float(amount),
                n=n_eff,
                auc=auc,
                auc_ci=bootstrap_auc_ci(
                    pos, neg, bootstrap, _derived_seed(seed, 0xB007, ai)
                )
                if bootstrap
                else None,
                eer=eer(pos, neg),
            )
        )
    out_meta = _sweep_meta(params, corpus, seed, n_eff, meta)
    out_meta["chunk"] = chunk
    return EvalReport(rows, out_meta)


def _sweep_meta(params, corpus: CorpusData, seed, n, extra) -> dict:
    meta = {
        "checkpoint": params_fingerprint(params),
        "seed": int(seed),
        "dataset": str(corpus.manifest_path),
        "n": int(n),
    }
    if extra:
        meta.update(extra)
    return meta


def retrieve_topk(
    query, candidates, params, model: ModelConfig, k: int
) -> list[tuple[int, float]]:
    """Rank candidate mels against one phoneme query; softmax probabilities at T=1."""
    if len(candidates) < 1:
        raise ValueError("retrieve_topk needs at least one candidate")
    if not 1 <= k <= len(candidates):
        raise ValueError(f"k must be in [1, {len(candidates)}], got {k}")
    q = embed_phonemes(params, model, [query])[0]
    c = embed_mels(params, model, list(candidates))
    scores = (c @ q).astype(np.float64)
    probs = softmax(scores[None, :], axis=1)[0]
    order = np.argsort(-scores, kind="stable")[:k]
    return [(int(i), float(probs[i])) for i in order]


def score_audio_pair(mel_a, mel_b, params, model: ModelConfig) -> float:
    """Text-free correspondence: both mels through the acoustic encoder, dot product."""
    emb = embed_mels(params, model, [mel_a, mel_b])
    return float(emb[0] @ emb[1])


def length_profile(
    params,
    model: ModelConfig,
    corpus: CorpusData,
    edges,
    n: int | None = None,
    seed: int = 0,
) -> list[dict]:
    """Matched-pair score distribution grouped by phoneme-sequence length.

    edges define buckets [e0,e1), ..., [e_last, inf). Observed lengths
    below e0 are an error (buckets must cover the data).
    """
    edges = [int(e) for e in edges]
    if not edges or sorted(edges) != edges or len(set(edges)) != len(edges):
        raise ValueError("edges must be a non-empty strictly increasing list")
    idx = _sample_indices(len(corpus), n, seed)
    seqs = [corpus.phonemes[i] for i in idx]
    mels = [corpus.mels[i] for i in idx]
    scores = diagonal_scores(
        embed_phonemes(params, model, seqs), embed_mels(params, model, mels)
    )
    lengths = np.array([len(s) for s in seqs])
    if lengths.min() < edges[0]:
        raise ValueError(
            f"observed length {lengths.min()} below first bucket edge {edges[0]}"
        )
    bucket_of = np.searchsorted(np.asarray(edges), lengths, side="right") - 1
    profile = []
    for b in range(len(edges)):
        mask = bucket_of == b
        lo = edges[b]
        hi = edges[b + 1] if b + 1 < len(edges) else None
        entry = {"lo": lo, "hi": hi, "count": int(mask.sum())}
        if entry["count"]:
            sel = scores[mask]
            entry.update(
                mean=float(sel.mean()),
                q25=float(np.percentile(sel, 25)),
                q50=float(np.percentile(sel, 50)),
                q75=float(np.percentile(sel, 75)),
            )
        else:
            entry.update(mean=None, q25=None, q50=None, q75=None)
        profile.append(entry)
    return profile


CSV_COLUMNS = (
    "method", "amount", "drop_pct", "drop_ci", "lift_pct", "lift_ci", "auc", "eer", "n",
)


def emit_report(report: EvalReport, fmt: str, path) -> Path:
    """Serialize a report as json, csv, or tsv-plot; deterministic bytes."""
    path = Path(path)
    if fmt == "json":
        text = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            rec = asdict(row)
            writer.writerow(
                ["" if rec[c] is None else repr(rec[c]) if isinstance(rec[c], float)
                 else rec[c] for c in CSV_COLUMNS]
            )
        text = buf.getvalue()
    elif fmt == "tsv-plot":
        lines = ["amount\tseries\tvalue\tci"]
        for row in report.rows:
            for metric, ci in (
                ("drop_pct", row.drop_ci),
                ("lift_pct", row.lift_ci),
                ("auc", row.auc_ci),
                ("eer", None),
            ):
                value = getattr(row, metric)
                if value is None:
                    continue
                lines.append(
                    f"{row.amount!r}\t{row.method}:{metric}\t{value!r}\t"
                    + ("" if ci is None else repr(ci))
                )
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown report format {fmt!r} (json | csv | tsv-plot)")
    path.write_text(text, encoding="utf-8")
    return path


def load_report(path) -> EvalReport:
    with open(path, encoding="utf-8") as fh:
        return EvalReport.from_dict(json.load(fh))
