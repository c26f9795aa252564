"""Input corruption: spectrogram mixing, additive Gaussian noise, phoneme substitution.

Spectrogram corruptions share one mixing rule, out = (1-alpha)*M + alpha*N,
applied frame-wise to standardized inputs; alpha in [0, 1] controls the
corruption amount. Phoneme substitution replaces each position
independently with probability p by a different, uniformly drawn symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import MelSpectrogram
from .vocab import N_RESERVED, PhonemeSequence, Vocabulary

METHODS = ("substitute", "gaussian", "mix")


@dataclass(frozen=True)
class CorruptionSpec:
    method: str
    amount: float
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown corruption method {self.method!r}")
        _check_amount(self.amount)


def _check_amount(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"corruption amount must be in [0, 1], got {alpha}")


def _match_length(noise: np.ndarray, n_frames: int) -> np.ndarray:
    """Crop or loop-tile the noise source to n_frames."""
    if noise.shape[0] >= n_frames:
        return noise[:n_frames]
    reps = -(-n_frames // noise.shape[0])
    return np.tile(noise, (reps, 1))[:n_frames]


def mix_spectrograms(
    mel: MelSpectrogram, other: MelSpectrogram, alpha: float
) -> MelSpectrogram:
    _check_amount(alpha)
    if not (mel.standardized and other.standardized):
        raise ValueError("mix_spectrograms requires standardized inputs")
    if mel.n_mels != other.n_mels:
        raise ValueError(f"mel bin mismatch: {mel.n_mels} vs {other.n_mels}")
    noise = _match_length(np.asarray(other.data, dtype=np.float64), mel.n_frames)
    out = (1.0 - alpha) * np.asarray(mel.data, dtype=np.float64) + alpha * noise
    return MelSpectrogram(out, standardized=True)


def gaussian_noise(mel: MelSpectrogram, alpha: float, seed: int) -> MelSpectrogram:
    _check_amount(alpha)
    if not mel.standardized:
        raise ValueError("gaussian_noise requires a standardized input")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(mel.data.shape)
    out = (1.0 - alpha) * np.asarray(mel.data, dtype=np.float64) + alpha * noise
    return MelSpectrogram(out, standardized=True)


def substitute_phonemes(
    seq: PhonemeSequence, p: float, seed: int, vocab: Vocabulary
) -> PhonemeSequence:
    _check_amount(p)
    n_phonemes = len(vocab.symbols)
    if p > 0.0 and n_phonemes < 2:
        raise ValueError("cannot substitute: vocabulary has a single phoneme")
    rng = np.random.default_rng(seed)
    ids = np.asarray(seq.ids, dtype=np.int64)
    selected = np.flatnonzero(rng.random(ids.size) < p)
    out = ids.copy()
    if selected.size:
        # uniform over the other n-1 phonemes: skip the current one by offset
        draws = rng.integers(0, n_phonemes - 1, size=selected.size)
        current = ids[selected] - N_RESERVED
        draws = draws + (draws >= current)
        out[selected] = draws + N_RESERVED
    return PhonemeSequence(out.tolist(), source_text=seq.source_text)
