"""WAV ingestion, log-mel featurization, and corpus standardization.

Pipeline constants: 16 kHz mono PCM in, 50 ms Hann window, 12.5 ms hop,
1024-point FFT, 80 triangular HTK-mel filters over 0-8000 Hz applied to
the power spectrum, natural log clamped at 1e-10. Frames of a clip with
n samples: 1 + floor((n - 800) / 200).
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .errors import AudioFormatError


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 16000
    win_length: int = 800      # 50 ms
    hop_length: int = 200      # 12.5 ms
    n_fft: int = 1024
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float = 8000.0
    power_floor: float = 1e-10


DEFAULT_FEATURES = FeatureConfig()


@dataclass
class MelSpectrogram:
    """frames x n_mels matrix of log-mel energies."""

    data: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise ValueError(f"mel data must be 2-D, got shape {self.data.shape}")

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_mels(self) -> int:
        return self.data.shape[1]


@dataclass
class StandardizeStats:
    """Per-mel-bin mean and standard deviation fitted on a training corpus."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean/std must be 1-D vectors of equal length")
        if np.any(self.std < 1e-8):
            raise ValueError("std entries must be >= 1e-8")


def hz_to_mel(f):
    """HTK mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config: FeatureConfig = DEFAULT_FEATURES) -> np.ndarray:
    """(n_mels, n_fft//2 + 1) matrix of unit-peak triangular filters."""
    n_bins = config.n_fft // 2 + 1
    fft_freqs = np.arange(n_bins) * (config.sample_rate / config.n_fft)
    edges_hz = mel_to_hz(
        np.linspace(hz_to_mel(config.fmin), hz_to_mel(config.fmax), config.n_mels + 2)
    )
    lo, mid, hi = edges_hz[:-2, None], edges_hz[1:-1, None], edges_hz[2:, None]
    up = (fft_freqs[None, :] - lo) / (mid - lo)
    down = (hi - fft_freqs[None, :]) / (hi - mid)
    return np.maximum(0.0, np.minimum(up, down))


def mel_center_freqs(config: FeatureConfig = DEFAULT_FEATURES) -> np.ndarray:
    """Peak frequency (Hz) of each triangular filter."""
    edges = mel_to_hz(
        np.linspace(hz_to_mel(config.fmin), hz_to_mel(config.fmax), config.n_mels + 2)
    )
    return edges[1:-1]


def load_wav(path) -> tuple[np.ndarray, int]:
    """Read a RIFF WAV file; only 16-bit mono PCM is accepted.

    Returns (samples scaled to [-1, 1) float64, sample_rate).
    """
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getcomptype() != "NONE":
                raise AudioFormatError(f"{path}: compressed WAV not supported")
            if wf.getnchannels() != 1:
                raise AudioFormatError(
                    f"{path}: expected mono, got {wf.getnchannels()} channels"
                )
            if wf.getsampwidth() != 2:
                raise AudioFormatError(
                    f"{path}: expected 16-bit PCM, got {8 * wf.getsampwidth()}-bit"
                )
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise AudioFormatError(f"{path}: not a valid WAV file ({exc})") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def featurize(
    samples: np.ndarray,
    sample_rate: int = 16000,
    config: FeatureConfig = DEFAULT_FEATURES,
) -> MelSpectrogram:
    """Compute an unstandardized log-mel spectrogram from 16 kHz samples."""
    if sample_rate != config.sample_rate:
        raise AudioFormatError(
            f"expected {config.sample_rate} Hz input, got {sample_rate} Hz "
            "(resampling is not performed)"
        )
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise AudioFormatError(f"expected mono samples, got shape {samples.shape}")
    if samples.size < config.win_length:
        raise AudioFormatError(
            f"clip too short: {samples.size} samples < one window ({config.win_length})"
        )
    n_frames = 1 + (samples.size - config.win_length) // config.hop_length
    idx = (
        np.arange(config.win_length)[None, :]
        + config.hop_length * np.arange(n_frames)[:, None]
    )
    frames = samples[idx] * np.hanning(config.win_length)[None, :]
    spectrum = np.fft.rfft(frames, n=config.n_fft, axis=1)
    power = np.abs(spectrum) ** 2
    energies = power @ mel_filterbank(config).T
    logmel = np.log(np.maximum(energies, config.power_floor))
    return MelSpectrogram(logmel.astype(np.float32), standardized=False)


def fit_stats(mels, eps: float = 1e-8) -> StandardizeStats:
    """Per-bin mean/std (population) over all frames of all given mels."""
    total = None
    total_sq = None
    count = 0
    for mel in mels:
        data = np.asarray(mel.data if isinstance(mel, MelSpectrogram) else mel,
                          dtype=np.float64)
        if total is None:
            total = data.sum(axis=0)
            total_sq = (data * data).sum(axis=0)
        else:
            if data.shape[1] != total.shape[0]:
                raise ValueError(
                    f"mel bin mismatch: {data.shape[1]} vs {total.shape[0]}"
                )
            total += data.sum(axis=0)
            total_sq += (data * data).sum(axis=0)
        count += data.shape[0]
    if count == 0:
        raise ValueError("cannot fit stats on an empty corpus")
    mean = total / count
    var = np.maximum(total_sq / count - mean * mean, 0.0)
    std = np.maximum(np.sqrt(var), eps)
    return StandardizeStats(mean, std)


def standardize(mel: MelSpectrogram, stats: StandardizeStats) -> MelSpectrogram:
    """(x - mean) / std per bin; result is float64 and flagged standardized."""
    if mel.n_mels != stats.mean.shape[0]:
        raise ValueError(
            f"dimension mismatch: mel has {mel.n_mels} bins, stats {stats.mean.shape[0]}"
        )
    out = (mel.data.astype(np.float64) - stats.mean) / stats.std
    return MelSpectrogram(out, standardized=True)


def destandardize(mel: MelSpectrogram, stats: StandardizeStats) -> MelSpectrogram:
    if mel.n_mels != stats.mean.shape[0]:
        raise ValueError(
            f"dimension mismatch: mel has {mel.n_mels} bins, stats {stats.mean.shape[0]}"
        )
    out = mel.data.astype(np.float64) * stats.std + stats.mean
    return MelSpectrogram(out, standardized=False)
