"""Score matrix, its two softmax normalizations, and the symmetric contrastive loss.

The score matrix holds raw dot products between phonetic and acoustic
embedding rows; temperature only enters when normalizing. The training
loss is the symmetric cross-entropy over both normalization axes,
negated and divided by 2B so that uniform logits give exactly ln B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class EmbeddingBatch:
    """B x D matrix of encoder outputs plus the producing modality."""

    rows: np.ndarray
    modality: str  # "phonetic" | "acoustic"

    def __post_init__(self):
        self.rows = np.asarray(self.rows)
        if self.rows.ndim != 2:
            raise ValueError(f"embedding batch must be 2-D, got {self.rows.shape}")


@dataclass
class ScoreMatrix:
    logits: np.ndarray
    temperature: float = 1.0

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 2:
            raise ValueError(f"score matrix must be 2-D, got {self.logits.shape}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")


@dataclass
class ProbMatrix:
    values: np.ndarray
    axis: str  # "rows" | "columns"


def _rows(emb) -> np.ndarray:
    return emb.rows if isinstance(emb, EmbeddingBatch) else np.asarray(emb)


def score_matrix(t_emb, a_emb, temperature: float = 1.0) -> ScoreMatrix:
    """L[i, j] = <t_emb[i], a_emb[j]>, unscaled."""
    t = _rows(t_emb)
    a = _rows(a_emb)
    if t.shape[1] != a.shape[1]:
        raise ValueError(
            f"embedding dimension mismatch: {t.shape[1]} vs {a.shape[1]}"
        )
    return ScoreMatrix(t @ a.T, temperature)


def softmax(x: np.ndarray, axis: int) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def normalize_scores(scores: ScoreMatrix, axis: str) -> ProbMatrix:
    """Softmax of logits/T over rows ("rows") or columns ("columns")."""
    if axis not in ("rows", "columns"):
        raise ValueError(f"axis must be 'rows' or 'columns', got {axis!r}")
    logits = scores.logits
    if not np.all(np.isfinite(logits)):
        raise ValueError("score matrix contains non-finite entries")
    scaled = logits / scores.temperature
    values = softmax(scaled, axis=1 if axis == "rows" else 0)
    return ProbMatrix(values, axis)


def _log_softmax(x: np.ndarray, axis: int) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def contrastive_loss(scores: ScoreMatrix) -> float:
    """Symmetric cross-entropy with matching pairs on the diagonal.

    loss = -(1/2B) * sum_i [log P_cols(i,i) + log P_rows(i,i)]
    """
    loss, _ = contrastive_loss_and_grad(scores)
    return loss


def contrastive_loss_and_grad(scores: ScoreMatrix) -> tuple[float, np.ndarray]:
    """Loss plus its gradient with respect to the raw logits."""
    logits = scores.logits
    n, m = logits.shape
    if n != m:
        raise ValueError(f"contrastive loss needs a square matrix, got {n}x{m}")
    tau = scores.temperature
    scaled = logits / tau
    log_p_cols = _log_softmax(scaled, axis=0)
    log_p_rows = _log_softmax(scaled, axis=1)
    diag = np.arange(n)
    loss = -(log_p_cols[diag, diag].sum() + log_p_rows[diag, diag].sum()) / (2.0 * n)
    p_cols = np.exp(log_p_cols)
    p_rows = np.exp(log_p_rows)
    eye = np.eye(n)
    grad = (p_cols + p_rows - 2.0 * eye) / (2.0 * n * tau)
    return float(loss), grad
