"""Dense matrix primitives, seeded random streams and small exact factorizations.

Matrices are plain C-ordered ``float64`` numpy arrays.  :func:`as_matrix`
is the single validation point (2-D, finite).  Products and factorizations
are delegated to BLAS/LAPACK through numpy; nothing here physically
transposes a large input, ``matmul_tn``/``matmul_nt`` read the transpose
through a strided view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RngSeed",
    "QrFactors",
    "SvdFactors",
    "ShapeError",
    "ConvergenceError",
    "as_matrix",
    "rng",
    "gaussian_matrix",
    "qr_thin",
    "svd_exact",
    "matmul",
    "matmul_tn",
    "matmul_nt",
]

_U64 = (1 << 64) - 1

# Tall inputs at most this wide are QR-reduced before the small SVD.
TALL_MAX_COLS = 32
TALL_MIN_ASPECT = 8
# |R_ii| <= RANK_TOL * max|R_jj| marks a rank-deficient column.
RANK_TOL = 1e-12


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class ConvergenceError(RuntimeError):
    """A dense factorization failed to converge."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class RngSeed:
    """A (seed, stream) pair naming one reproducible random stream."""

    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _U64 and 0 <= self.stream <= _U64):
            raise ValueError("seed and stream must be unsigned 64-bit integers")

    def child(self, index: int) -> "RngSeed":
        """Derive an independent sub-stream; ``index`` selects which one."""
        state = np.random.SeedSequence([self.seed, self.stream, int(index)])
        return RngSeed(self.seed, int(state.generate_state(1, np.uint64)[0]))

    @classmethod
    def coerce(cls, value) -> "RngSeed":
        if isinstance(value, cls):
            return value
        if value is None:
            return cls()
        return cls(int(value))


def rng(seed) -> np.random.Generator:
    """PCG64 generator for ``seed``; distinct streams never overlap."""
    seed = RngSeed.coerce(seed)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed.seed, seed.stream])))


@dataclass(frozen=True)
class QrFactors:
    q: np.ndarray
    r: np.ndarray
    rank_deficient: bool = False


@dataclass(frozen=True)
class SvdFactors:
    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def as_matrix(a, name="matrix") -> np.ndarray:
    """Return ``a`` as a finite, 2-D, C-contiguous float64 array."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf")
    return a


def gaussian_matrix(rows: int, cols: int, seed) -> np.ndarray:
    """``rows x cols`` matrix of iid N(0, 1) draws (numpy's ziggurat sampler)."""
    if rows < 1 or cols < 1:
        raise ValueError(f"gaussian_matrix needs positive dimensions, got {rows}x{cols}")
    return rng(seed).standard_normal((rows, cols))


def qr_thin(a) -> QrFactors:
    """Economy QR with sign-normalized diagonal of R.

    Columns whose pivot falls below ``RANK_TOL`` times the largest pivot set
    ``rank_deficient``; the factors are still returned.
    """
    a = np.asarray(a, dtype=np.float64)
    n, k = a.shape
    if n < k:
        raise ShapeError(f"qr_thin needs n_rows >= n_cols, got {a.shape}")
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    q = q * signs
    r = r * signs[:, None]
    diag = np.abs(np.diag(r))
    top = diag.max() if diag.size else 0.0
    deficient = bool(top == 0.0 or np.any(diag <= RANK_TOL * top))
    return QrFactors(q, r, deficient)


def _tall_svd(a):
    # Householder QR first, so the small SVD sees R (k x k) and no accuracy
    # is lost to squaring the condition number.
    q, r = np.linalg.qr(a, mode="reduced")
    ur, s, vt = np.linalg.svd(r)
    return q @ ur, s, vt.T


def svd_exact(a, full=False) -> SvdFactors:
    """Thin SVD ``a = u @ diag(s) @ v.T`` with ``s`` non-increasing.

    Tall inputs with at most ``TALL_MAX_COLS`` columns are reduced by QR and
    the small triangular factor is decomposed; everything else goes to LAPACK
    ``gesdd`` with a ``gesvd`` fallback.
    """
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("svd_exact input contains NaN or Inf")
    n, k = a.shape
    if not full and 0 < k <= TALL_MAX_COLS and n >= TALL_MIN_ASPECT * k:
        u, s, v = _tall_svd(a)
        return SvdFactors(u, s, v)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=full)
    except np.linalg.LinAlgError:
        import scipy.linalg

        try:
            u, s, vt = scipy.linalg.svd(a, full_matrices=full, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"SVD of {a.shape} matrix did not converge: {exc}") from exc
    return SvdFactors(u, s, vt.T)


def _check_inner(a_shape, b_shape, inner_a, inner_b, label):
    if inner_a != inner_b:
        raise ShapeError(f"{label}: cannot multiply shapes {a_shape} and {b_shape}")


def matmul(a, b) -> np.ndarray:
    """``a @ b``."""
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    _check_inner(a.shape, b.shape, a.shape[-1], b.shape[0], "matmul")
    return a @ b


def matmul_tn(a, b) -> np.ndarray:
    """``a.T @ b`` without copying ``a``."""
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    _check_inner(a.shape, b.shape, a.shape[0], b.shape[0], "matmul_tn")
    return a.T @ b


def matmul_nt(a, b) -> np.ndarray:
    """``a @ b.T`` without copying ``b``."""
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    _check_inner(a.shape, b.shape, a.shape[-1], b.shape[-1], "matmul_nt")
    return a @ b.T
