"""Adaptive randomized SVD and its uses: PCA, sliced inverse regression, mixed-model scans."""

__version__ = "0.1.0"

from .core import RngSeed, gaussian_matrix, qr_thin, svd_exact
from .factor import ArsvdConfig, LowRankFactorization, arsvd_adaptive, arsvd_fixed, power_blocks
from .geneig import geneig_lowrank, pca, sir_kernel
from .lmm import assoc_scan, fit_null, grm_factor, naive_scan, standardize
from .selection import bicv_error, rank_changepoint, select_t_and_d, stability_scores
from .simgen import AdmixSimConfig, LowRankSimConfig, sim_admixture, sim_lowrank

__all__ = [
    "RngSeed",
    "gaussian_matrix",
    "qr_thin",
    "svd_exact",
    "ArsvdConfig",
    "LowRankFactorization",
    "arsvd_adaptive",
    "arsvd_fixed",
    "power_blocks",
    "pca",
    "sir_kernel",
    "geneig_lowrank",
    "standardize",
    "grm_factor",
    "fit_null",
    "assoc_scan",
    "naive_scan",
    "stability_scores",
    "rank_changepoint",
    "bicv_error",
    "select_t_and_d",
    "LowRankSimConfig",
    "AdmixSimConfig",
    "sim_lowrank",
    "sim_admixture",
]
