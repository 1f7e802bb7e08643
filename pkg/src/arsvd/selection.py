"""Choosing the rank and the number of power iterations from the data.

The rank at a given iteration count ``t`` comes from the stability of the
leading singular vectors across independent random projections: signal
directions are reproduced almost exactly, noise directions are not, and a
rank-sum change point on the ordered stability scores separates the two.
The iteration count is the one minimizing the 2 x 2 bi-cross-validation
error ``||A - B D^+ C||_F^2``, with ``D`` factored at the stability rank.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import RngSeed, as_matrix, rng
from .factor import ArsvdConfig, LowRankFactorization, iterate_power_blocks, project_and_factor
from .ranktests import spearman_abs_columns, wilcoxon_ranksum_p

logger = logging.getLogger(__name__)

WEAK_CHANGEPOINT_P = 0.05
TIE_ATOL = 1e-12  # BiCV errors below this fraction of the held-out energy are ties
BLOCKS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class StabilityProfile:
    t: int
    scores: np.ndarray
    b: int
    degenerate: int = 0  # number of (pair, direction) correlations on constant vectors


@dataclass(frozen=True)
class ChangePoint:
    """Split of the stability sequence with the smallest rank-sum p-value.

    ``p_values[i]`` belongs to split ``k = i + 2``; the first group is
    directions ``1..k-1`` (1-based) and ``d_hat = k_hat - 1``.
    """

    k_hat: int
    p_values: np.ndarray
    weak: bool = False
    degenerate: bool = False

    @property
    def d_hat(self) -> int:
        return self.k_hat - 1

    @property
    def min_p(self) -> float:
        return float(self.p_values.min())


@dataclass
class BicvReport:
    t_values: np.ndarray
    errors: np.ndarray  # median held-out error per t
    ranks: np.ndarray  # median rank estimate per t
    block_errors: np.ndarray  # (t, block)
    block_ranks: np.ndarray  # (t, block)
    t_star: int
    d_star: int


@dataclass
class SelectionReport:
    """Everything computed while choosing ``(t*, d*)``.

    ``profiles[(t, block)]`` and ``changepoints[(t, block)]`` hold the
    stability analysis of each training block.
    """

    bicv: BicvReport | None
    profiles: dict = field(default_factory=dict)
    changepoints: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    width: int = 0

    @property
    def t_star(self) -> int:
        return self.bicv.t_star if self.bicv else 0

    @property
    def d_star(self) -> int:
        return self.bicv.d_star if self.bicv else 0

    def summary(self) -> dict:
        out = {"t_star": self.t_star, "d_star": self.d_star, "flags": list(self.flags), "width": self.width}
        if self.bicv is not None:
            out["t_values"] = self.bicv.t_values.tolist()
            out["bicv_median_error"] = self.bicv.errors.tolist()
            out["bicv_median_rank"] = self.bicv.ranks.tolist()
            out["bicv_block_errors"] = self.bicv.block_errors.tolist()
            out["bicv_block_ranks"] = self.bicv.block_ranks.tolist()
        return out


def _projection_seeds(seed, b):
    seed = RngSeed.coerce(seed)
    return [seed.child(j) for j in range(b)]


def stability_profiles(x, t_max, d_max, b=5, seed=None, projection_seeds=None) -> list[StabilityProfile]:
    """Stability profiles for every ``t = 1..t_max`` from one power sweep per projection.

    Each projection ``Omega_b`` is n x d_max.  For every ``t`` the leading
    left singular vectors are the Rayleigh-Ritz estimates from the span of
    ``(X X^T)^t Omega_b``; the score of direction ``k`` is the mean over
    projection pairs of the absolute Spearman correlation of the two
    estimates of that direction.
    """
    x = as_matrix(x, "x")
    if b < 2:
        raise ValueError("need at least two projections")
    if not 1 <= d_max <= min(x.shape):
        raise ValueError(f"d_max={d_max} must lie in 1..{min(x.shape)}")
    seeds = projection_seeds or _projection_seeds(seed, b)
    if len(seeds) != b:
        raise ValueError("projection_seeds must have length b")

    vectors = [[None] * b for _ in range(t_max)]
    for j, s in enumerate(seeds):
        for block in iterate_power_blocks(x, t_max, d_max, s):
            vectors[block.t - 1][j] = project_and_factor(block, d_max).u

    profiles = []
    n_pairs = b * (b - 1) // 2
    for t in range(1, t_max + 1):
        total = np.zeros(d_max)
        degenerate = 0
        us = vectors[t - 1]
        for j1 in range(b - 1):
            for j2 in range(j1 + 1, b):
                scores, deg = spearman_abs_columns(us[j1], us[j2])
                total += scores
                degenerate += int(deg.sum())
        profiles.append(StabilityProfile(t, np.clip(total / n_pairs, 0.0, 1.0), b, degenerate))
    return profiles


def stability_scores(x, t, d_max, b=5, seed=None, projection_seeds=None) -> StabilityProfile:
    """Stability profile at a single iteration count ``t``."""
    return stability_profiles(x, t, d_max, b, seed, projection_seeds)[-1]


def rank_changepoint(profile) -> ChangePoint:
    """Locate the signal/noise split in a stability profile (or raw score vector)."""
    scores = np.asarray(getattr(profile, "scores", profile), dtype=np.float64)
    d_max = scores.size
    if d_max < 4:
        raise ValueError(f"change point needs d_max >= 4 (got {d_max}); raise d_max")
    p_values = np.array([wilcoxon_ranksum_p(scores[: k - 1], scores[k - 1 :]) for k in range(2, d_max)])
    # first minimum (smallest k); p-values equal up to round-off count as tied
    i = int(np.flatnonzero(p_values <= p_values.min() * (1 + 1e-12))[0])
    degenerate = bool(np.all(scores == scores[0]))
    return ChangePoint(i + 2, p_values, weak=bool(p_values[i] > WEAK_CHANGEPOINT_P), degenerate=degenerate)


def random_split(n, p, seed):
    """Random halving of rows and columns, as index arrays ``(rows, cols)``.

    ``rows[0]``/``rows[1]`` are the two row groups, likewise for columns.
    """
    g = rng(seed)
    r, c = g.permutation(n), g.permutation(p)
    return (np.sort(r[: n // 2]), np.sort(r[n // 2 :])), (np.sort(c[: p // 2]), np.sort(c[p // 2 :]))


def schur_error(a, b, c, fact: LowRankFactorization, rtol=1e-10) -> tuple[float, bool]:
    """``||A - B D^+ C||_F^2`` with ``D^+ = V S^-1 U^T`` from ``fact``.

    Singular values below ``rtol * s_1`` are dropped.  If nothing survives
    the prediction is zero and the second return value is True.
    """
    s = fact.s
    keep = s > rtol * s[0] if s.size and s[0] > 0 else np.zeros(s.size, bool)
    if not keep.any():
        return float(np.sum(a * a)), True
    left = (b @ fact.v[:, keep]) / s[keep]
    resid = a - left @ (fact.u[:, keep].T @ c)
    return float(np.sum(resid * resid)), False


def _block_sweep(d, t_max, d_max, cfg, seed):
    """Per-t stability rank and factorization of one training block."""
    profiles = stability_profiles(d, t_max, d_max, cfg.n_projections, seed.child(0))
    changes = [rank_changepoint(pr) for pr in profiles]
    width = min(cfg.d_max + cfg.delta, min(d.shape))
    facts = []
    for block in iterate_power_blocks(d, t_max, width, seed.child(1)):
        k = min(changes[block.t - 1].d_hat, width)
        facts.append(project_and_factor(block, k))
    return profiles, changes, facts


def bicv_sweep(x, cfg: ArsvdConfig, split_seed=None) -> SelectionReport:
    """Bi-cross-validation over ``t = 1..cfg.t_max`` on one shared 2 x 2 split."""
    x = as_matrix(x, "x")
    n, p = x.shape
    if n < 4 or p < 4:
        raise ValueError(f"bi-cross-validation needs at least 4 rows and columns, got {x.shape}")
    split_seed = RngSeed.coerce(split_seed) if split_seed is not None else cfg.seed.child(7919)
    rows, cols = random_split(n, p, split_seed)
    small = min(n - n // 2, p - p // 2, n // 2, p // 2)
    d_max = min(cfg.d_max, small)
    if d_max < 4:
        raise ValueError(f"training blocks too small for a change point (d_max would be {d_max})")

    report = SelectionReport(bicv=None, width=cfg.width(x.shape))
    if cfg.clamped(x.shape):
        report.flags.append("width_clamped")
    if d_max < cfg.d_max:
        report.flags.append("d_max_clamped")
    if not np.any(x):
        report.flags.append("degenerate")
        return report

    t_max = cfg.t_max
    errors = np.zeros((t_max, 4))
    ranks = np.zeros((t_max, 4), dtype=int)
    collapsed = False
    held_energy = 0.0
    for bi, (ra, cb) in enumerate(BLOCKS):
        held_r, train_r = rows[ra], rows[1 - ra]
        held_c, train_c = cols[cb], cols[1 - cb]
        a = x[np.ix_(held_r, held_c)]
        b = x[np.ix_(held_r, train_c)]
        c = x[np.ix_(train_r, held_c)]
        d = x[np.ix_(train_r, train_c)]
        held_energy += float(np.sum(a * a)) / 4
        profiles, changes, facts = _block_sweep(d, t_max, d_max, cfg, cfg.seed.child(100 + bi))
        for ti in range(t_max):
            err, flag = schur_error(a, b, c, facts[ti], cfg.pinv_rtol)
            errors[ti, bi] = err
            ranks[ti, bi] = changes[ti].d_hat
            collapsed |= flag
            report.profiles[(ti + 1, bi)] = profiles[ti]
            report.changepoints[(ti + 1, bi)] = changes[ti]

    med_err = np.median(errors, axis=1)
    med_rank = np.median(ranks, axis=1)
    best = med_err.min()
    # errors at round-off level (exactly low-rank input) all count as ties
    tol = cfg.bicv_rtol * abs(best) + TIE_ATOL * held_energy
    ti = int(np.flatnonzero(med_err <= best + tol)[0])
    t_star = ti + 1
    d_star = int(np.floor(med_rank[ti]))
    report.bicv = BicvReport(np.arange(1, t_max + 1), med_err, med_rank, errors, ranks, t_star, d_star)
    if collapsed:
        report.flags.append("rank_collapse")
    weak = sum(report.changepoints[(t_star, bi)].weak for bi in range(4))
    if weak >= 2:
        report.flags.append("weak_changepoint")
    if any(report.changepoints[(t_star, bi)].degenerate for bi in range(4)):
        report.flags.append("degenerate")
    logger.debug("bicv errors %s ranks %s -> t*=%d d*=%d", med_err, med_rank, t_star, d_star)
    return report


def bicv_error(x, t, cfg: ArsvdConfig, split_seed=None) -> tuple[float, float]:
    """Median held-out error and median rank estimate at iteration count ``t``."""
    if not 1 <= t <= cfg.t_max:
        raise ValueError(f"t={t} outside 1..{cfg.t_max}")
    report = bicv_sweep(x, cfg.replace(t_max=t), split_seed)
    if report.bicv is None:
        return 0.0, 0
    return float(report.bicv.errors[t - 1]), float(report.bicv.ranks[t - 1])


def select_t_and_d(x, cfg: ArsvdConfig, split_seed=None) -> SelectionReport:
    """Pick ``t*`` minimizing the median BiCV error and ``d* = d_hat(t*)``."""
    return bicv_sweep(x, cfg, split_seed)
