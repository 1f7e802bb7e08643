"""Linear mixed model association scans with a low-rank relatedness matrix.

The genetic relatedness matrix ``K = G G^T / p`` (``G`` the standardized
genotypes) is never formed.  A randomized SVD ``G ~ U S V^T`` gives
``K ~ U diag(S^2 / p) U^T``.  The phenotype covariance is

    V = sigma_g^2 K + sigma_e^2 I = sigma_g^2 (U diag(lam) U^T + delta I),

so on ``span(U)`` it has eigenvalues ``sigma_g^2 (lam + delta)`` and on the
orthogonal complement ``sigma_e^2``.  Quadratic forms ``a^T H^-1 b`` with
``H = U diag(lam) U^T + delta I`` only need ``U^T a``, ``U^T b`` and
``a^T b``, which keeps every likelihood evaluation and every per-variant
test at ``O(n d)``.

Variance components are fit once under the null; each variant is then
tested by generalized least squares with ``delta`` held fixed and the
residual scale re-estimated, giving a 1-df Wald statistic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .core import as_matrix
from .factor import ArsvdConfig, arsvd_adaptive, arsvd_fixed

logger = logging.getLogger(__name__)

LOG_DELTA_MIN = math.log(1e-5)
LOG_DELTA_MAX = math.log(1e5)
GRID_POINTS = 100
LOG_DELTA_TOL = 1e-6
FLAT_TOL = 1e-8  # relative spread of the grid log-likelihood below which delta is unidentifiable


@dataclass
class GenotypeMatrix:
    """Raw genotypes (n individuals x p variants) and their standardized form.

    ``standardized`` holds only the polymorphic columns; ``kept`` maps its
    columns back to indices of ``raw``.
    """

    raw: np.ndarray
    variant_ids: list
    standardized: np.ndarray | None = None
    kept: np.ndarray | None = None
    dropped: np.ndarray | None = None

    @property
    def shape(self):
        return self.raw.shape


@dataclass
class GrmFactor:
    u: np.ndarray  # n x d, orthonormal
    lam: np.ndarray  # eigenvalues of K on span(u)
    d_star: int
    n_variants: int  # number of variants the GRM was built from (scaling 1 / n_variants)
    t_star: int = 0
    report: object = None

    def dense(self) -> np.ndarray:
        return (self.u * self.lam) @ self.u.T


@dataclass
class VarianceComponents:
    sigma_g2: float
    sigma_e2: float
    delta: float
    loglik: float
    method: str = "ML"
    beta: np.ndarray | None = None
    flags: list = field(default_factory=list)
    k_scale: float = 1.0  # tr(K) / n of the relatedness matrix used in the fit

    @property
    def heritability(self) -> float:
        # genetic share of the average per-sample variance; equals sigma_g2 / (sigma_g2 + sigma_e2)
        # for a full standardized GRM, whose trace is n
        genetic = self.sigma_g2 * self.k_scale
        return genetic / (genetic + self.sigma_e2)


@dataclass
class AssocResult:
    variant_ids: list
    beta: np.ndarray
    se: np.ndarray
    stat: np.ndarray
    p: np.ndarray
    flags: np.ndarray  # True where the variant could not be tested

    def __len__(self):
        return self.beta.size


def standardize(raw, variant_ids=None) -> GenotypeMatrix:
    """Center and scale each variant to unit (population) variance.

    Monomorphic variants are dropped and recorded in ``dropped``.
    """
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise ValueError(f"genotypes must be 2-D, got shape {raw.shape}")
    if not np.isin(raw, (0, 1, 2)).all():
        raise ValueError("genotype entries must be 0, 1 or 2")
    n, p = raw.shape
    if variant_ids is None:
        variant_ids = [f"v{j}" for j in range(p)]
    g = raw.astype(np.float64)
    mean = g.mean(axis=0)
    sd = g.std(axis=0)
    kept = np.flatnonzero(sd > 0)
    if kept.size == 0:
        raise ValueError("all variants are monomorphic")
    z = (g[:, kept] - mean[kept]) / sd[kept]
    dropped = np.flatnonzero(sd == 0)
    return GenotypeMatrix(raw, list(variant_ids), z, kept, dropped)


def grm_factor(
    g: GenotypeMatrix,
    cfg: ArsvdConfig | None = None,
    exclude=None,
    rank: int | None = None,
    t: int | None = None,
) -> GrmFactor:
    """Low-rank factor of the relatedness matrix from a randomized SVD of the genotypes.

    ``exclude`` is a boolean mask or index array over the *standardized*
    columns to leave out (leave-group-out).  ``rank`` fixes ``d`` instead of
    choosing it adaptively.
    """
    cfg = cfg or ArsvdConfig()
    z = g.standardized
    if exclude is not None:
        mask = np.ones(z.shape[1], bool)
        mask[np.asarray(exclude)] = False
        if not mask.any():
            raise ValueError("exclusion leaves no variants for the relatedness matrix")
        z = z[:, mask]
    p_used = z.shape[1]
    report = None
    if rank is None:
        fact, report = arsvd_adaptive(z, cfg)
    else:
        fact = arsvd_fixed(z, rank, t or cfg.t_max, cfg)
    return GrmFactor(fact.u, fact.s**2 / p_used, fact.rank, p_used, fact.iterations, report)


class _Rotated:
    """Inner products ``a^T H^-1 b`` for ``H = U diag(lam) U^T + delta I``."""

    def __init__(self, k: GrmFactor, y, w):
        self.lam = k.lam
        self.n = y.shape[0]
        self.d = k.lam.size
        self.uy = k.u.T @ y
        self.uw = k.u.T @ w
        self.yy = float(y @ y)
        self.wy = w.T @ y
        self.ww = w.T @ w

    def forms(self, delta):
        inv = 1.0 / (self.lam + delta)
        rest = 1.0 / delta
        wHw = (self.uw.T * inv) @ self.uw + rest * (self.ww - self.uw.T @ self.uw)
        wHy = (self.uw.T * inv) @ self.uy + rest * (self.wy - self.uw.T @ self.uy)
        yHy = float(self.uy**2 @ inv + rest * (self.yy - self.uy @ self.uy))
        return wHw, wHy, yHy

    def logdet(self, delta):
        return float(np.sum(np.log(self.lam + delta)) + (self.n - self.d) * math.log(delta))


def _profile(rot: _Rotated, log_delta, reml):
    delta = math.exp(log_delta)
    wHw, wHy, yHy = rot.forms(delta)
    beta = np.linalg.solve(wHw, wHy)
    resid = max(yHy - float(wHy @ beta), 1e-300)
    n, c = rot.n, rot.ww.shape[0]
    dof = n - c if reml else n
    sigma_g2 = resid / dof
    ll = -0.5 * (dof * math.log(2 * math.pi * sigma_g2) + rot.logdet(delta) + dof)
    if reml:
        ll -= 0.5 * (np.linalg.slogdet(wHw)[1] - np.linalg.slogdet(rot.ww)[1])
    return ll, sigma_g2, beta


def fit_null(y, covariates, k: GrmFactor, reml: bool = False) -> VarianceComponents:
    """Maximize the (restricted) likelihood over ``delta = sigma_e^2 / sigma_g^2``.

    A log-spaced grid on ``[1e-5, 1e5]`` brackets the optimum, which is then
    refined by bounded scalar minimization in ``log(delta)``.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    w = as_matrix(np.asarray(covariates, dtype=np.float64).reshape(y.size, -1), "covariates")
    if np.linalg.matrix_rank(w) < w.shape[1]:
        raise ValueError("covariates are not full column rank")
    if k.u.shape[0] != y.size:
        raise ValueError(f"relatedness factor has {k.u.shape[0]} rows, phenotype has {y.size}")
    rot = _Rotated(k, y, w)
    grid = np.linspace(LOG_DELTA_MIN, LOG_DELTA_MAX, GRID_POINTS)
    lls = np.array([_profile(rot, ld, reml)[0] for ld in grid])
    if not np.all(np.isfinite(lls)):
        raise FloatingPointError("non-finite likelihood on the delta grid")
    i = int(np.argmax(lls))
    flags = []
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]
    res = scipy.optimize.minimize_scalar(
        lambda ld: -_profile(rot, ld, reml)[0],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": LOG_DELTA_TOL},
    )
    log_delta = float(res.x) if -res.fun >= lls[i] else float(grid[i])
    if i in (0, GRID_POINTS - 1):
        flags.append("boundary")
    if lls.max() - lls.min() <= FLAT_TOL * max(1.0, abs(lls.max())):
        # e.g. a flat relatedness spectrum spanning all samples: delta trades off against sigma_g2
        flags.append("unidentifiable")
    ll, sigma_g2, beta = _profile(rot, log_delta, reml)
    delta = math.exp(log_delta)
    return VarianceComponents(
        sigma_g2, sigma_g2 * delta, delta, ll, "REML" if reml else "ML", beta, flags, float(k.lam.sum()) / y.size
    )


def _scan(x, y, w, u, lam, delta):
    """GLS Wald test of every column of ``x`` given covariates ``w``.

    ``u``/``lam`` may be empty (then ``H = delta I``, i.e. ordinary least
    squares).  The residual scale is re-estimated per variant.
    """
    n, c = w.shape
    inv = 1.0 / (lam + delta)
    rest = 1.0 / delta
    ux, uy, uw = u.T @ x, u.T @ y, u.T @ w

    def form(ua, ub, ab):
        return (ua.T * inv) @ ub + rest * (ab - ua.T @ ub)

    wHw = form(uw, uw, w.T @ w)
    wHy = form(uw, uy, w.T @ y)
    yHy = float(form(uy, uy, y @ y))
    xHw = form(ux, uw, x.T @ w)  # p x c
    xHy = form(ux, uy, x.T @ y)  # p
    xHx = (ux**2 * inv[:, None]).sum(axis=0) + rest * (np.einsum("ij,ij->j", x, x) - (ux**2).sum(axis=0))

    wHw_inv = np.linalg.inv(wHw)
    alpha = wHw_inv @ wHy
    # projections removing the covariates under H
    xPx = xHx - np.einsum("ij,jk,ik->i", xHw, wHw_inv, xHw)
    xPy = xHy - xHw @ alpha
    yPy = yHy - float(wHy @ alpha)

    bad = xPx <= 1e-10 * np.maximum(xHx, 1e-300)
    xPx_safe = np.where(bad, 1.0, xPx)
    beta = np.where(bad, 0.0, xPy / xPx_safe)
    rss = np.maximum(yPy - beta * xPy, 0.0)
    scale = rss / (n - c - 1)
    se = np.sqrt(scale / xPx_safe)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(bad | (se <= 0), 0.0, (beta / np.where(se > 0, se, 1.0)) ** 2)
    se = np.where(bad, np.inf, se)
    return beta, se, stat, bad


def chisq1_sf(x):
    """Upper tail of the chi-square distribution with one degree of freedom."""
    from scipy.special import erfc

    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("chi-square statistic must be non-negative")
    out = erfc(np.sqrt(x / 2.0))
    return float(out) if out.ndim == 0 else out


def _columns(g):
    if isinstance(g, GenotypeMatrix):
        return g.standardized, [g.variant_ids[j] for j in g.kept]
    x = as_matrix(g, "genotypes")
    return x, [f"v{j}" for j in range(x.shape[1])]


def _result(ids, beta, se, stat, bad):
    p = np.where(bad, 1.0, chisq1_sf(stat))
    return AssocResult(ids, beta, se, stat, np.clip(p, np.finfo(float).tiny, 1.0), bad)


def assoc_scan(g, y, covariates, vc: VarianceComponents, k: GrmFactor, columns=None) -> AssocResult:
    """Per-variant Wald tests with the null ``delta`` held fixed.

    ``g`` is a :class:`GenotypeMatrix` (its standardized columns are tested)
    or an n x p array.  ``columns`` restricts the scan to a subset.
    """
    x, ids = _columns(g)
    if columns is not None:
        columns = np.asarray(columns)
        x, ids = x[:, columns], [ids[j] for j in columns]
    y = np.asarray(y, dtype=np.float64).ravel()
    w = np.asarray(covariates, dtype=np.float64).reshape(y.size, -1)
    if x.shape[0] != y.size:
        raise ValueError(f"genotypes have {x.shape[0]} individuals, phenotype has {y.size}")
    beta, se, stat, bad = _scan(x, y, w, k.u, k.lam, vc.delta)
    return _result(ids, beta, se, stat, bad)


def naive_scan(g, y, covariates, columns=None) -> AssocResult:
    """Ordinary least squares per variant, no random effect."""
    x, ids = _columns(g)
    if columns is not None:
        columns = np.asarray(columns)
        x, ids = x[:, columns], [ids[j] for j in columns]
    y = np.asarray(y, dtype=np.float64).ravel()
    w = np.asarray(covariates, dtype=np.float64).reshape(y.size, -1)
    n = y.size
    beta, se, stat, bad = _scan(x, y, w, np.zeros((n, 0)), np.zeros(0), 1.0)
    return _result(ids, beta, se, stat, bad)


def with_intercept(covariates, n):
    """Prepend an intercept column unless one is already present."""
    ones = np.ones((n, 1))
    if covariates is None:
        return ones
    w = np.asarray(covariates, dtype=np.float64).reshape(n, -1)
    if np.any(np.all(w == 1.0, axis=0)):
        return w
    return np.hstack([ones, w])
