"""PCA and low-rank generalized eigendecomposition (sliced inverse regression).

The generalized problem ``Gamma g = lambda Sigma g`` is solved without
forming the p x p ``Gamma``.  With ``Gamma = X^T K X`` and the slice kernel
factored as ``K = L L^T``, a randomized SVD of ``X^T L`` gives
``Gamma = U S^2 U^T``.  Every solution with ``lambda > 0`` has
``Sigma g`` in ``span(U)``; writing ``e = S U^T g`` turns the problem into
the d x d symmetric eigenproblem

    S U^T Sigma^-1 U S e = lambda e,    g = Sigma^-1 U S e / lambda.

``method="restricted"`` instead confines ``g`` to ``span(U)`` and solves
``S^-1 U^T Sigma U S^-1 e = e / lambda`` (``g = U S^-1 e``).  The two agree
whenever ``span(U)`` is invariant under ``Sigma`` (e.g. ``Sigma = I``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import as_matrix
from .factor import ArsvdConfig, arsvd_adaptive, arsvd_fixed

logger = logging.getLogger(__name__)

DROP_RTOL = 1e-10


@dataclass
class PcaResult:
    components: np.ndarray  # p x d, orthonormal columns
    explained_variance: np.ndarray
    scores: np.ndarray  # n x d
    mean: np.ndarray
    report: object = None
    flags: list = field(default_factory=list)


@dataclass
class SirKernel:
    """Slice kernel ``K = L @ L.T`` with ``L[:, h] = 1_h / sqrt(n_h * n)``."""

    labels: np.ndarray  # slice index per sample
    n_slices: int
    flags: list = field(default_factory=list)

    @property
    def factor(self) -> np.ndarray:
        n = self.labels.size
        counts = np.bincount(self.labels, minlength=self.n_slices)
        lmat = np.zeros((n, self.n_slices))
        lmat[np.arange(n), self.labels] = 1.0 / np.sqrt(counts[self.labels] * n)
        return lmat

    @property
    def k_xy(self) -> np.ndarray:
        lmat = self.factor
        return lmat @ lmat.T


@dataclass
class GenEigResult:
    directions: np.ndarray  # p x r
    eigenvalues: np.ndarray  # descending, > 0
    gamma_rank: int
    flags: list = field(default_factory=list)


def center(x):
    x = as_matrix(x, "x")
    mean = x.mean(axis=0)
    return x - mean, mean


def pca(x, cfg: ArsvdConfig | None = None, rank: int | None = None, t: int | None = None) -> PcaResult:
    """Principal components of the column-centered data.

    Rank and iteration count are chosen adaptively unless ``rank`` is given
    (then ``t`` defaults to ``cfg.t_max``).
    """
    cfg = cfg or ArsvdConfig()
    xc, mean = center(x)
    n = xc.shape[0]
    if n < 2:
        raise ValueError("pca needs at least 2 samples")
    flags = []
    if np.any(np.ptp(xc, axis=0) == 0):
        flags.append("constant_columns")
    report = None
    if rank is None:
        fact, report = arsvd_adaptive(xc, cfg)
        flags.extend(report.flags)
    else:
        fact = arsvd_fixed(xc, rank, t or cfg.t_max, cfg)
    scores = fact.u * fact.s
    scores -= scores.mean(axis=0)  # exact zero means up to rounding
    return PcaResult(fact.v, fact.s**2 / n, scores, mean, report, flags)


def sir_kernel(y, n_slices: int = 10, categorical: bool | None = None) -> SirKernel:
    """Slice the response into groups.

    Categorical responses (the default for integer or non-numeric ``y`` with
    at most ``n_slices`` distinct values) get one slice per class; numeric
    responses are cut at quantiles into ``n_slices`` groups of near-equal
    size.  Empty slices are dropped and ties never split across slices.
    """
    y = np.asarray(y)
    n = y.size
    if n_slices < 2 or n_slices > n:
        raise ValueError(f"need 2 <= n_slices <= n, got {n_slices} with n={n}")
    flags = []
    values = np.unique(y)
    if categorical is None:
        categorical = not np.issubdtype(y.dtype, np.floating) and values.size <= n_slices
    if categorical or values.size <= 1:
        labels = np.searchsorted(values, y)
    else:
        ranks = np.argsort(np.argsort(y, kind="stable"), kind="stable")
        labels = (ranks * n_slices) // n
        # ties in y must share a slice: use the slice of the first occurrence
        order = np.argsort(y, kind="stable")
        sorted_y = y[order]
        first = np.searchsorted(sorted_y, sorted_y, side="left")
        labels[order] = labels[order][first]
    used, labels = np.unique(labels, return_inverse=True)
    if used.size < n_slices and not categorical:
        flags.append("slices_merged")
    if used.size == 1:
        flags.append("degenerate")
    return SirKernel(labels.astype(np.int64), int(used.size), flags)


def _sigma_solve(xc, ridge):
    """Return a function applying ``(xc^T xc / n + ridge I)^-1`` to a p x k block."""
    n, p = xc.shape
    if p <= n:
        sigma = xc.T @ xc / n
        if ridge > 0:
            sigma[np.diag_indices(p)] += ridge
        try:
            cho = scipy.linalg.cho_factor(sigma)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(
                "Sigma is numerically singular; pass ridge > 0 (e.g. 1e-6 * trace / p)"
            ) from exc
        return lambda b: scipy.linalg.cho_solve(cho, b)
    if ridge <= 0:
        raise np.linalg.LinAlgError("Sigma is singular when n < p; pass ridge > 0 (e.g. 1e-6 * trace / p)")
    # Woodbury: (ridge I + xc^T xc / n)^-1 = (I - xc^T (n ridge I + xc xc^T)^-1 xc) / ridge
    inner = xc @ xc.T
    inner[np.diag_indices(n)] += n * ridge
    cho = scipy.linalg.cho_factor(inner)
    return lambda b: (b - xc.T @ scipy.linalg.cho_solve(cho, xc @ b)) / ridge


def geneig_lowrank(
    x,
    kernel: SirKernel,
    r: int | None = None,
    cfg: ArsvdConfig | None = None,
    ridge: float = 0.0,
    method: str = "exact",
) -> GenEigResult:
    """Top-``r`` solutions of ``Gamma g = lambda Sigma g`` with ``Gamma = Xc^T K Xc``.

    ``Sigma = Xc^T Xc / n + ridge I`` where ``Xc`` is the column-centered
    data.  The rank of ``Gamma`` is the number of singular values of
    ``Xc^T L`` above ``1e-10`` times the largest.
    """
    if method not in ("exact", "restricted"):
        raise ValueError(f"unknown method {method!r}")
    xc, _ = center(x)
    n, p = xc.shape
    lmat = kernel.factor
    if lmat.shape[0] != n:
        raise ValueError(f"kernel built for {lmat.shape[0]} samples, data has {n}")
    flags = list(kernel.flags)
    if ridge > 0:
        flags.append("ridge")

    m = xc.T @ lmat  # p x H
    cfg = cfg or ArsvdConfig(d_max=min(m.shape), t_max=4)
    width = min(m.shape)
    fact = arsvd_fixed(m, width, cfg.t_max, cfg.replace(d_max=width))
    s = fact.s
    if s.size == 0 or s[0] <= 0:
        return GenEigResult(np.zeros((p, 0)), np.zeros(0), 0, flags + ["degenerate"])
    keep = s > DROP_RTOL * s[0]
    if not keep.all():
        flags.append("dropped_small_singular_values")
    u, s = fact.u[:, keep], s[keep]
    d = s.size
    r = d if r is None else r
    if not 1 <= r <= d:
        raise ValueError(f"r={r} must lie in 1..{d} (rank of Gamma)")

    if method == "exact":
        solve = _sigma_solve(xc, ridge)
        sig_inv_u = solve(u)
        small = (s[:, None] * (u.T @ sig_inv_u)) * s[None, :]
        small = (small + small.T) / 2
        lam, e = np.linalg.eigh(small)
        order = np.argsort(lam)[::-1][:r]
        lam, e = lam[order], e[:, order]
        g = sig_inv_u @ (s[:, None] * e)
    else:
        xu = xc @ (u / s)
        small = xu.T @ xu / n + ridge * np.diag(1.0 / s**2)
        small = (small + small.T) / 2
        mu, e = np.linalg.eigh(small)
        if mu[0] <= 0:
            raise np.linalg.LinAlgError("restricted Sigma is singular on span(U); pass ridge > 0")
        order = np.argsort(mu)[:r]  # smallest mu <-> largest lambda
        lam, e = 1.0 / mu[order], e[:, order]
        g = (u / s) @ e
    if np.any(lam <= 0):
        flags.append("nonpositive_eigenvalues")
    g = g / np.linalg.norm(g, axis=0)
    idx = np.argmax(np.abs(g), axis=0)
    g = g * np.sign(g[idx, np.arange(g.shape[1])])
    return GenEigResult(g, lam, d, flags)


def gamma_dense(x, kernel: SirKernel) -> np.ndarray:
    """Dense ``Xc^T K Xc`` (for small problems and verification)."""
    xc, _ = center(x)
    return xc.T @ kernel.k_xy @ xc


def sigma_dense(x, ridge: float = 0.0) -> np.ndarray:
    xc, _ = center(x)
    sigma = xc.T @ xc / xc.shape[0]
    return sigma + ridge * np.eye(sigma.shape[0])
