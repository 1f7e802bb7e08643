"""Spearman correlation and the Wilcoxon rank-sum test.

Both work on midranks (ties share the average rank).  The rank-sum test is
exact for small pooled samples and normal-approximated otherwise.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

EXACT_MAX_TOTAL = 12


def _rank_corr(ranks_u, ranks_w):
    """Column-wise Pearson correlation of rank matrices; NaN when a column is constant."""
    du = ranks_u - ranks_u.mean(axis=0)
    dw = ranks_w - ranks_w.mean(axis=0)
    num = np.sum(du * dw, axis=0)
    den = np.sqrt(np.sum(du * du, axis=0) * np.sum(dw * dw, axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def spearman_abs_columns(u, w):
    """|Spearman rho| between matching columns of ``u`` and ``w``.

    Returns ``(scores, degenerate)``; a column pair where either side is
    constant scores 0 and is marked in the boolean ``degenerate`` mask.
    """
    u = np.asarray(u, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if u.shape != w.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {w.shape}")
    if u.ndim == 1:
        u, w = u[:, None], w[:, None]
    rho = _rank_corr(rankdata(u, axis=0), rankdata(w, axis=0))
    degenerate = np.isnan(rho)
    scores = np.clip(np.abs(np.nan_to_num(rho, nan=0.0)), 0.0, 1.0)
    return scores, degenerate


def spearman_abs(u, w) -> float:
    """Absolute Spearman rank correlation; 0 if either vector is constant."""
    u = np.asarray(u, dtype=np.float64).ravel()
    w = np.asarray(w, dtype=np.float64).ravel()
    if u.size != w.size:
        raise ValueError(f"length mismatch: {u.size} vs {w.size}")
    if u.size < 3:
        raise ValueError("spearman_abs needs at least 3 observations")
    scores, _ = spearman_abs_columns(u, w)
    return float(scores[0])


def _exact_two_sided(doubled_ranks, m, observed):
    # counts[j][s]: number of size-j subsets whose doubled rank sum is s
    total = int(sum(doubled_ranks))
    counts = [np.zeros(total + 1, dtype=np.int64) for _ in range(m + 1)]
    counts[0][0] = 1
    for r in doubled_ranks:
        for j in range(m, 0, -1):
            counts[j][r:] += counts[j - 1][: total + 1 - r]
    dist = counts[m]
    center = m * (len(doubled_ranks) + 1)  # doubled expected rank sum
    sums = np.arange(total + 1)
    extreme = np.abs(sums - center) >= abs(observed - center)
    return float(dist[extreme].sum() / dist.sum())


def wilcoxon_ranksum_p(a, b) -> float:
    """Two-sided Wilcoxon rank-sum p-value for a location shift between ``a`` and ``b``.

    Exact (enumerating all label assignments of the pooled midranks) when
    ``len(a) + len(b) <= 12``; otherwise the normal approximation with tie
    and continuity corrections.  All values tied gives 1.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    m, k = a.size, b.size
    if m < 1 or k < 1:
        raise ValueError("both samples need at least one value")
    pooled = np.concatenate([a, b])
    if np.all(pooled == pooled[0]):
        return 1.0
    n = m + k
    ranks = rankdata(pooled)
    if n <= EXACT_MAX_TOTAL:
        doubled = np.rint(2 * ranks).astype(np.int64)
        return _exact_two_sided(doubled.tolist(), m, int(doubled[:m].sum()))

    w = ranks[:m].sum()
    mean = m * (n + 1) / 2.0
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = np.sum(tie_counts**3 - tie_counts) / (n * (n - 1))
    var = m * k / 12.0 * ((n + 1) - tie_term)
    dev = abs(w - mean) - 0.5
    if dev <= 0 or var <= 0:
        return 1.0
    z = dev / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))
