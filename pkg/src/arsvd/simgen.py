"""Simulators: low-rank signal plus Gaussian noise, and admixed genotypes.

Low-rank: ``X = U S V^T + E`` with ``E_ij ~ N(0, 1/n)`` by default
(``noise_var`` overrides the variance).  The smallest signal
singular value is ``kappa`` times the largest singular value of the noise
matrix that is actually added; consecutive signal values are separated by
Exp(1) increments.

Admixture: per-individual ancestry ``theta_i ~ Dir(alpha)``, per-population
allele frequencies ``phi_jk ~ Beta(1, 1)``, two allele copies per site each
drawn from the population picked by ``theta_i``, and a binary phenotype
depending on ancestry only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import RngSeed, rng


@dataclass(frozen=True)
class LowRankSimConfig:
    n: int
    p: int
    d_star: int
    kappa: float = 1.0
    seed: RngSeed = field(default_factory=RngSeed)
    noise_var: float | None = None  # None means 1/n

    def __post_init__(self):
        object.__setattr__(self, "seed", RngSeed.coerce(self.seed))
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if self.noise_var is not None and not self.noise_var > 0:
            raise ValueError("noise_var must be positive")
        if not 1 <= self.d_star <= min(self.n, self.p):
            raise ValueError(f"d_star={self.d_star} must lie in 1..min(n, p)={min(self.n, self.p)}")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")


@dataclass(frozen=True)
class AdmixSimConfig:
    n: int
    p: int
    n_pops: int = 3
    alpha: float = 1.0
    seed: RngSeed = field(default_factory=RngSeed)
    phenotype_pop: int = 0  # zero-based population driving the phenotype

    def __post_init__(self):
        object.__setattr__(self, "seed", RngSeed.coerce(self.seed))
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if self.n_pops < 2:
            raise ValueError("need at least 2 populations")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0 <= self.phenotype_pop < self.n_pops:
            raise ValueError("phenotype_pop out of range")


@dataclass
class SimTruth:
    u: np.ndarray | None = None
    s: np.ndarray | None = None
    v: np.ndarray | None = None
    noise_top: float | None = None
    theta: np.ndarray | None = None
    phi: np.ndarray | None = None


def stiefel(n, k, g: np.random.Generator) -> np.ndarray:
    """Uniformly distributed n x k matrix with orthonormal columns."""
    q, r = np.linalg.qr(g.standard_normal((n, k)), mode="reduced")
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def top_singular_value(e) -> float:
    """Largest singular value via the smaller Gram matrix."""
    gram = e @ e.T if e.shape[0] <= e.shape[1] else e.T @ e
    m = gram.shape[0]
    top = scipy.linalg.eigh(gram, eigvals_only=True, subset_by_index=[m - 1, m - 1])[0]
    return float(np.sqrt(max(top, 0.0)))


def sim_lowrank(cfg: LowRankSimConfig):
    """Return ``(X, truth)``; ``truth.s`` is sorted in decreasing order."""
    g = rng(cfg.seed)
    n, p, d = cfg.n, cfg.p, cfg.d_star
    var = 1.0 / n if cfg.noise_var is None else cfg.noise_var
    e = g.standard_normal((n, p)) * np.sqrt(var)
    noise_top = top_singular_value(e)
    s = np.empty(d)
    s[0] = cfg.kappa * noise_top
    if d > 1:
        s[1:] = s[0] + np.cumsum(g.exponential(1.0, size=d - 1))
    s = s[::-1].copy()
    u = stiefel(n, d, g)
    v = stiefel(p, d, g)
    x = (u * s) @ v.T + e
    return x, SimTruth(u=u, s=s, v=v, noise_top=noise_top)


def sim_admixture(cfg: AdmixSimConfig):
    """Return ``(genotypes, phenotype, truth)``.

    ``genotypes`` is n x p with entries in {0, 1, 2}; ``phenotype`` is 0/1
    and depends on the individual's ancestry fraction in
    ``cfg.phenotype_pop`` only.
    """
    g = rng(cfg.seed)
    n, p, k = cfg.n, cfg.p, cfg.n_pops
    theta = g.dirichlet(np.full(k, cfg.alpha), size=n)
    theta /= theta.sum(axis=1, keepdims=True)
    phi = g.beta(1.0, 1.0, size=(p, k))
    cum = np.cumsum(theta, axis=1)
    cum[:, -1] = 1.0
    geno = np.zeros((n, p), dtype=np.int8)
    for _copy in range(2):
        # population of origin of this allele copy, per individual and site
        z = (g.random((n, p))[:, :, None] > cum[:, None, :]).sum(axis=2)
        freq = phi[np.arange(p)[None, :], z]
        geno += (g.random((n, p)) < freq).astype(np.int8)
    share = theta[:, cfg.phenotype_pop]
    y = (g.random(n) < 0.5 * share + 0.1 * (1.0 - share)).astype(np.float64)
    return geno, y, SimTruth(theta=theta, phi=phi)
