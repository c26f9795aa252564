"""Scalar evaluation metrics: drop/lift counting, AUC-ROC, EER, CIs, Spearman."""

from __future__ import annotations

import numpy as np


def _as1d(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def average_ranks(x) -> np.ndarray:
    """1-based ranks with ties assigned their group mean."""
    x = _as1d(x, "x")
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    # first (1-based) rank of each tie group, then the group's mean rank
    starts = np.concatenate(([0], np.cumsum(counts)[:-1])) + 1
    return (starts + (counts - 1) / 2.0)[inverse]


def drop_lift(original, corrupted) -> tuple[float, float]:
    """Percent of paired scores that strictly fell / rose; ties count to neither."""
    orig = _as1d(original, "original")
    corr = _as1d(corrupted, "corrupted")
    if orig.shape != corr.shape:
        raise ValueError(f"length mismatch: {orig.shape[0]} vs {corr.shape[0]}")
    n = orig.shape[0]
    if n == 0:
        raise ValueError("drop_lift needs at least one pair")
    drop = 100.0 * np.count_nonzero(corr < orig) / n
    lift = 100.0 * np.count_nonzero(corr > orig) / n
    return drop, lift


def auc_roc(pos, neg) -> float:
    """Mann-Whitney AUC: P(pos > neg) + 0.5 * P(pos = neg)."""
    pos = _as1d(pos, "pos")
    neg = _as1d(neg, "neg")
    if pos.size == 0 or neg.size == 0:
        raise ValueError("auc_roc needs non-empty positive and negative sets")
    ranks = average_ranks(np.concatenate([pos, neg]))
    u = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def eer(pos, neg) -> float:
    """Equal-error rate via exhaustive threshold sweep over observed scores.

    Accept when score >= threshold. Candidate thresholds are every pooled
    score plus one above the maximum; the sweep returns the mean of FAR
    and FRR at the threshold minimizing |FAR - FRR| (lowest such
    threshold on ties).
    """
    pos = _as1d(pos, "pos")
    neg = _as1d(neg, "neg")
    if pos.size == 0 or neg.size == 0:
        raise ValueError("eer needs non-empty positive and negative sets")
    pooled = np.unique(np.concatenate([pos, neg]))
    thresholds = np.concatenate([pooled, [pooled[-1] + 1.0]])
    # FAR(t) = frac(neg >= t), FRR(t) = frac(pos < t); integer counts first so
    # exact ties in |FAR - FRR| stay exact ties in floating point
    neg_sorted = np.sort(neg)
    pos_sorted = np.sort(pos)
    far = (neg.size - np.searchsorted(neg_sorted, thresholds, side="left")) / neg.size
    frr = np.searchsorted(pos_sorted, thresholds, side="left") / pos.size
    best = int(np.argmin(np.abs(far - frr)))
    return float((far[best] + frr[best]) / 2.0)


def binomial_ci(p_hat: float, n: int) -> float:
    """95% normal-approximation half-width for a proportion: 1.96*sqrt(p(1-p)/n)."""
    if not 0.0 <= p_hat <= 1.0:
        raise ValueError(f"p_hat must be in [0, 1], got {p_hat}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return float(1.96 * np.sqrt(p_hat * (1.0 - p_hat) / n))


def spearman(x, y) -> float:
    """Spearman rank correlation with mean ranks for ties."""
    x = _as1d(x, "x")
    y = _as1d(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.size < 2:
        raise ValueError("spearman needs at least two observations")
    rx = average_ranks(x)
    ry = average_ranks(y)
    sx = rx.std()
    sy = ry.std()
    if sx == 0.0 or sy == 0.0:
        raise ValueError("spearman undefined: zero rank variance")
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))


def threshold_roc(scores, labels) -> tuple[np.ndarray, np.ndarray, float]:
    """ROC of -score as a detector of the positive (label=1) class.

    Returns (fpr, tpr, auc); the curve starts at (0, 0), ends at (1, 1),
    and is monotone non-decreasing in both coordinates.
    """
    scores = _as1d(scores, "scores")
    labels = np.asarray(labels).astype(bool)
    if labels.shape != scores.shape:
        raise ValueError("scores and labels must have equal length")
    if labels.all() or not labels.any():
        raise ValueError("threshold_roc needs both classes present")
    det = -scores
    d_pos = det[labels]
    d_neg = det[~labels]
    thresholds = np.unique(det)[::-1]  # sweep from strictest to loosest
    tpr = [0.0]
    fpr = [0.0]
    for t in thresholds:
        tpr.append(np.count_nonzero(d_pos >= t) / d_pos.size)
        fpr.append(np.count_nonzero(d_neg >= t) / d_neg.size)
    return np.asarray(fpr), np.asarray(tpr), auc_roc(d_pos, d_neg)


def bootstrap_auc_ci(
    pos, neg, n_resamples: int = 1000, seed: int = 0
) -> float:
    """Percentile-bootstrap 95% half-width for auc_roc(pos, neg)."""
    pos = _as1d(pos, "pos")
    neg = _as1d(neg, "neg")
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    rng = np.random.default_rng(seed)
    stats = np.empty(n_resamples)
    for i in range(n_resamples):
        p = pos[rng.integers(0, pos.size, pos.size)]
        n = neg[rng.integers(0, neg.size, neg.size)]
        stats[i] = auc_roc(p, n)
    lo, hi = np.percentile(stats, [2.5, 97.5])
    return float((hi - lo) / 2.0)
