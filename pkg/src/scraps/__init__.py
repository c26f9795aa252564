"""scraps: joint phonetic/acoustic embeddings trained contrastively, with a
corruption-based sensitivity and robustness evaluation harness."""

from .contrastive import (
    EmbeddingBatch,
    ProbMatrix,
    ScoreMatrix,
    contrastive_loss,
    contrastive_loss_and_grad,
    normalize_scores,
    score_matrix,
)
from .model.config import ModelConfig
from .model.encoder import encode_mel, encode_phonemes, integrate
from .training import TrainConfig, fit, load_checkpoint, save_checkpoint
from .vocab import PhonemeSequence, Vocabulary, load_vocab, phonemize

__version__ = "0.1.0"

__all__ = [
    "EmbeddingBatch",
    "ModelConfig",
    "PhonemeSequence",
    "ProbMatrix",
    "ScoreMatrix",
    "TrainConfig",
    "Vocabulary",
    "contrastive_loss",
    "contrastive_loss_and_grad",
    "encode_mel",
    "encode_phonemes",
    "fit",
    "integrate",
    "load_checkpoint",
    "load_vocab",
    "normalize_scores",
    "phonemize",
    "save_checkpoint",
    "score_matrix",
    "__version__",
]
