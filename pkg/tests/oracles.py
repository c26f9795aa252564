"""Brute-force reference implementations used to cross-check the metric ops.

These mirror the definitions literally (pairwise counting, full threshold
scans, rank-difference formulas) and deliberately avoid the vectorized
paths used by the library.
"""

import numpy as np


def brute_auc(pos, neg) -> float:
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def brute_eer(pos, neg) -> float:
    thresholds = sorted(set(list(pos) + list(neg)))
    thresholds.append(thresholds[-1] + 1.0)
    best = None
    for t in thresholds:
        far = sum(1 for n in neg if n >= t) / len(neg)
        frr = sum(1 for p in pos if p < t) / len(pos)
        if best is None or abs(far - frr) < best[0]:
            best = (abs(far - frr), (far + frr) / 2.0)
    return best[1]


def brute_drop_lift(original, corrupted):
    drops = sum(1 for o, c in zip(original, corrupted) if c < o)
    lifts = sum(1 for o, c in zip(original, corrupted) if c > o)
    return 100.0 * drops / len(original), 100.0 * lifts / len(original)


def brute_ranks(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def brute_spearman(x, y) -> float:
    rx = brute_ranks(list(x))
    ry = brute_ranks(list(y))
    n = len(rx)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry)) / n
    sx = (sum((a - mx) ** 2 for a in rx) / n) ** 0.5
    sy = (sum((b - my) ** 2 for b in ry) / n) ** 0.5
    return cov / (sx * sy)


def random_score_instance(rng: np.random.Generator, max_n: int = 20):
    """Small instance with ties made likely by a coarse value grid."""
    n_pos = int(rng.integers(1, max_n + 1))
    n_neg = int(rng.integers(1, max_n + 1))
    pool = rng.integers(0, 8, size=n_pos + n_neg) / 2.0
    return pool[:n_pos].tolist(), pool[n_pos:].tolist()
