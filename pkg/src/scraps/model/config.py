"""Architecture and ablation configuration for the dual encoders."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_layers: int = 3
    n_heads: int = 8
    d_model: int = 256
    dropout: float = 0.1
    d_embed: int = 1024
    temperature: float = 1.0
    share_integrator: bool = True
    use_integrator: bool = True
    normalize_embeddings: bool = False  # optional CLIP-style L2 norm, off by default
    max_phonemes: int = 256
    max_frames: int = 1024
    n_mels: int = 80
    dtype: str = "float32"

    def __post_init__(self):
        if self.vocab_size < 4:
            raise ValueError("vocab_size must cover the reserved IDs plus phonemes")
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.d_embed < 1:
            raise ValueError("d_embed must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)
