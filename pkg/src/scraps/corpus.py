"""Synthetic corpus generation and manifest handling.

A corpus directory holds:
    manifest.jsonl        one {"id", "phonemes": [symbols], "mel": relpath} per line
    stats.json            {"mean": [...], "std": [...]} fitted on the train split
    vocab.txt             one phoneme symbol per line
    mels/<id>.smel        raw (unstandardized) spectrograms

When a dev split is requested the generator writes `manifest_train.jsonl`
and `manifest_dev.jsonl` from the same pass, so both splits share the
per-phoneme templates and the standardization stats.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import MelSpectrogram, StandardizeStats, fit_stats, standardize
from .smel import read_smel, write_smel
from .vocab import Vocabulary, load_vocab, save_vocab


@dataclass(frozen=True)
class SynthConfig:
    vocab_size: int = 40
    n_utterances: int = 2256
    seq_len_range: tuple[int, int] = (4, 12)
    frames_per_phoneme_range: tuple[int, int] = (2, 5)
    noise_sigma: float = 0.25
    speaker_bias_sigma: float = 0.1
    seed: int = 0
    n_mels: int = 80

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        for name, (lo, hi) in (
            ("seq_len_range", self.seq_len_range),
            ("frames_per_phoneme_range", self.frames_per_phoneme_range),
        ):
            if lo < 1 or hi < lo:
                raise ValueError(f"{name} must satisfy 1 <= lo <= hi, got ({lo}, {hi})")
        if self.noise_sigma < 0 or self.speaker_bias_sigma < 0:
            raise ValueError("sigmas must be >= 0")
        if self.n_utterances < 1:
            raise ValueError("n_utterances must be >= 1")


@dataclass
class ManifestEntry:
    id: str
    phoneme_ids: list[int]
    mel_path: str  # absolute, resolved at load time


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry]
    stats_path: str
    vocab_path: str

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.id in seen:
                raise ValueError(f"duplicate utterance id {e.id!r}")
            seen.add(e.id)


def phoneme_templates(vocab_size: int, n_mels: int, rng: np.random.Generator) -> np.ndarray:
    """One smoothed template vector per phoneme, (vocab_size, n_mels)."""
    raw = rng.standard_normal((vocab_size, n_mels))
    # moving average over mel bins, width 5, window truncated at the edges
    kernel = np.ones(5)
    smooth = np.empty_like(raw)
    for p in range(vocab_size):
        num = np.convolve(raw[p], kernel, mode="same")
        den = np.convolve(np.ones(n_mels), kernel, mode="same")
        smooth[p] = num / den
    return smooth


def synth_symbols(vocab_size: int) -> list[str]:
    width = max(2, len(str(vocab_size - 1)))
    return [f"p{i:0{width}d}" for i in range(vocab_size)]


def synth_corpus(config: SynthConfig, out_dir, dev_count: int = 0) -> list[Path]:
    """Generate a deterministic synthetic corpus under out_dir.

    dev_count > 0 splits the last dev_count utterances into a dev
    manifest; stats are then fitted on the train split only. Returns the
    manifest paths that were written.
    """
    if not 0 <= dev_count < config.n_utterances:
        raise ValueError("dev_count must be in [0, n_utterances)")
    out_dir = Path(out_dir)
    mel_dir = out_dir / "mels"
    mel_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(config.seed)
    templates = phoneme_templates(config.vocab_size, config.n_mels, rng)
    symbols = synth_symbols(config.vocab_size)
    vocab = Vocabulary(tuple(symbols))

    lo_len, hi_len = config.seq_len_range
    lo_d, hi_d = config.frames_per_phoneme_range

    records = []
    mels = []
    for u in range(config.n_utterances):
        seq_len = int(rng.integers(lo_len, hi_len + 1))
        phonemes = rng.integers(0, config.vocab_size, size=seq_len)
        durations = rng.integers(lo_d, hi_d + 1, size=seq_len)
        bias = config.speaker_bias_sigma * rng.standard_normal(config.n_mels)
        frames = np.repeat(templates[phonemes], durations, axis=0)
        frames = frames + config.noise_sigma * rng.standard_normal(frames.shape) + bias
        uid = f"utt_{u:06d}"
        rel = f"mels/{uid}.smel"
        write_smel(MelSpectrogram(frames.astype(np.float32)), out_dir / rel)
        records.append(
            {"id": uid, "phonemes": [symbols[p] for p in phonemes], "mel": rel}
        )
        mels.append(frames)

    n_train = config.n_utterances - dev_count
    stats = fit_stats(mels[:n_train])
    save_stats(stats, out_dir / "stats.json")
    save_vocab(vocab, out_dir / "vocab.txt")

    written = []
    if dev_count:
        splits = [("manifest_train.jsonl", records[:n_train]),
                  ("manifest_dev.jsonl", records[n_train:])]
    else:
        splits = [("manifest.jsonl", records)]
    for name, recs in splits:
        path = out_dir / name
        with open(path, "w", encoding="utf-8") as fh:
            for rec in recs:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        written.append(path)
    return written


def save_stats(stats: StandardizeStats, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"mean": stats.mean.tolist(), "std": stats.std.tolist()},
            fh,
            sort_keys=True,
        )
        fh.write("\n")


def load_stats(path) -> StandardizeStats:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return StandardizeStats(np.array(obj["mean"]), np.array(obj["std"]))


def load_manifest(path, vocab: Vocabulary | None = None) -> tuple[CorpusManifest, Vocabulary]:
    """Load a JSONL manifest; vocab/stats paths resolve beside the file."""
    path = Path(path)
    base = path.parent
    vocab_path = base / "vocab.txt"
    if vocab is None:
        vocab = load_vocab(vocab_path)
    entries = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            ids = [vocab.id_of(sym) for sym in rec["phonemes"]]
            mel_path = base / rec["mel"]
            if not mel_path.is_file():
                raise FileNotFoundError(f"{path}:{ln}: missing mel file {mel_path}")
            entries.append(ManifestEntry(rec["id"], ids, str(mel_path)))
    manifest = CorpusManifest(entries, str(base / "stats.json"), str(vocab_path))
    return manifest, vocab


@dataclass
class CorpusData:
    """A manifest fully loaded into memory, mels standardized."""

    ids: list[str]
    phonemes: list[np.ndarray]        # int64 token IDs, no reserved tokens
    mels: list[np.ndarray]            # float64 standardized (frames, n_mels)
    vocab: Vocabulary
    stats: StandardizeStats
    manifest_path: str

    def __len__(self) -> int:
        return len(self.ids)


def load_corpus(manifest_path, vocab: Vocabulary | None = None) -> CorpusData:
    manifest, vocab = load_manifest(manifest_path, vocab)
    stats = load_stats(manifest.stats_path)
    ids, phon, mels = [], [], []
    for entry in manifest.entries:
        mel = standardize(read_smel(entry.mel_path), stats)
        ids.append(entry.id)
        phon.append(np.asarray(entry.phoneme_ids, dtype=np.int64))
        mels.append(mel.data)
    return CorpusData(ids, phon, mels, vocab, stats, str(manifest_path))
