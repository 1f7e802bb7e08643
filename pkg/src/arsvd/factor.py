"""Two-stage randomized SVD with normalized power iterations.

Stage one draws a Gaussian block ``Omega`` in sample space (n x l) and
applies ``X X^T`` to it ``t`` times, re-orthonormalizing after every
multiplication.  Stage two projects the data onto the resulting basis,
``B = X^T Q``, and takes the exact SVD of the small p x l matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .core import RngSeed, as_matrix, gaussian_matrix, qr_thin, svd_exact


@dataclass(frozen=True)
class ArsvdConfig:
    """Knobs for the randomized factorization.

    ``d_max`` bounds the rank, ``t_max`` the number of power iterations and
    ``delta`` is the oversampling added to ``d_max`` to get the working
    width.  ``n_projections`` is the number of independent projections used
    for stability scoring and ``pinv_rtol`` the relative cutoff applied when
    pseudo-inverting the training block in bi-cross-validation.  BiCV errors
    within ``bicv_rtol`` (relative) of the minimum are ties, resolved in
    favour of the smaller iteration count.
    """

    d_max: int = 20
    t_max: int = 10
    delta: int = 10
    seed: RngSeed = field(default_factory=RngSeed)
    n_projections: int = 5
    pinv_rtol: float = 1e-10
    bicv_rtol: float = 1e-4

    def __post_init__(self):
        if self.d_max < 1:
            raise ValueError(f"d_max must be >= 1, got {self.d_max}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.n_projections < 2:
            raise ValueError("n_projections must be >= 2")
        if self.pinv_rtol < 0 or self.bicv_rtol < 0:
            raise ValueError("tolerances must be non-negative")
        object.__setattr__(self, "seed", RngSeed.coerce(self.seed))

    def width(self, shape) -> int:
        """Working width ``l = min(d_max + delta, min(n, p))``."""
        return min(self.d_max + self.delta, min(shape))

    def clamped(self, shape) -> bool:
        return self.d_max + self.delta > min(shape)

    def replace(self, **changes) -> "ArsvdConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class PowerBlock:
    """Orthonormal basis of ``(X X^T)^t Omega``.

    ``projected`` caches ``X^T basis``; the next iteration and the
    projection stage both need it.
    """

    t: int
    basis: np.ndarray
    projected: np.ndarray = field(repr=False, default=None)
    zero_input: bool = False


@dataclass(frozen=True)
class LowRankFactorization:
    """``X ~ u @ diag(s) @ v.T`` with ``u`` n x rank and ``v`` p x rank."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    rank: int
    iterations: int

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T

    @classmethod
    def empty(cls, n, p, iterations=0):
        return cls(np.zeros((n, 0)), np.zeros(0), np.zeros((p, 0)), 0, iterations)


def _orthonormalize(a):
    return np.linalg.qr(a, mode="reduced")[0]


def iterate_power_blocks(x, t_max, width, seed, omega=None) -> Iterator[PowerBlock]:
    """Yield orthonormal bases of ``(X X^T)^t Omega`` for ``t = 1..t_max``.

    Each block is derived from the previous one, so the whole sequence costs
    ``2 * t_max`` products with ``X`` (plus the cached ``X^T Q``).
    """
    if omega is None:
        omega = gaussian_matrix(x.shape[0], width, seed)
    f = _orthonormalize(omega)
    xtf = x.T @ f
    zero = not np.any(xtf)
    for t in range(1, t_max + 1):
        if not zero:
            f = _orthonormalize(x @ _orthonormalize(xtf))
            xtf = x.T @ f
        yield PowerBlock(t, f, xtf, zero_input=zero)


def power_blocks(x, cfg: ArsvdConfig) -> list[PowerBlock]:
    """All power blocks ``t = 1..cfg.t_max`` at the working width of ``cfg``."""
    x = as_matrix(x, "x")
    return list(iterate_power_blocks(x, cfg.t_max, cfg.width(x.shape), cfg.seed))


def _sign_fix(u, v):
    # largest-magnitude entry of each u column made positive
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, v * signs


def project_and_factor(block: PowerBlock, d: int) -> LowRankFactorization:
    """Stage two: SVD of ``B = X^T Q`` rotated back, truncated to rank ``d``."""
    f = svd_exact(block.projected)
    # X ~ Q Q^T X = Q B^T = (Q Z) S W^T with B = W S Z^T
    u = block.basis @ f.v[:, :d]
    v = f.u[:, :d]
    u, v = _sign_fix(u, v)
    return LowRankFactorization(u, f.s[:d].copy(), v, d, block.t)


def arsvd_fixed(x, d: int, t: int, cfg: ArsvdConfig | None = None) -> LowRankFactorization:
    """Rank-``d`` randomized SVD using the ``t``-th power block."""
    cfg = cfg or ArsvdConfig(d_max=d, t_max=max(t, 1))
    x = as_matrix(x, "x")
    width = cfg.width(x.shape)
    if not 1 <= d <= width:
        raise ValueError(f"rank d={d} outside 1..{width} (working width)")
    if not 1 <= t <= cfg.t_max:
        raise ValueError(f"iteration t={t} outside 1..{cfg.t_max}")
    block = None
    for block in iterate_power_blocks(x, t, width, cfg.seed):
        pass
    return project_and_factor(block, d)


def arsvd_adaptive(x, cfg: ArsvdConfig | None = None):
    """Randomized SVD with rank and iteration count chosen from the data.

    Returns ``(factorization, report)`` where the report is a
    :class:`~arsvd.selection.SelectionReport`.
    """
    from .selection import select_t_and_d

    cfg = cfg or ArsvdConfig()
    x = as_matrix(x, "x")
    report = select_t_and_d(x, cfg)
    if report.d_star == 0:
        return LowRankFactorization.empty(*x.shape), report
    d = min(report.d_star, cfg.width(x.shape))
    return arsvd_fixed(x, d, report.t_star, cfg), report
