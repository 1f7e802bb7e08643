"""Run-time comparison of full SVD, dense eigendecomposition and randomized SVD."""

from __future__ import annotations

import time

import numpy as np

from .core import RngSeed, rng
from .factor import ArsvdConfig, arsvd_fixed

MODES = ("svd", "eig", "rsvd")


def estimated_flops(mode, n, p, rank=100, t=2, delta=10) -> float:
    """Rough floating-point operation count, used only to skip infeasible runs."""
    m = min(n, p)
    if mode == "svd":
        return 4.0 * n * p * m + 8.0 * m**3
    if mode == "eig":
        return 2.0 * n * n * p + 9.0 * n**3
    if mode == "rsvd":
        width = min(rank + delta, m)
        return 2.0 * n * p * width * (2 * t + 2)
    raise ValueError(f"unknown mode {mode!r}")


def bench_matrix(n, p, rank, seed) -> np.ndarray:
    """Low-rank signal plus N(0, 1/n) noise.

    Signal values decay geometrically from five times the noise edge
    ``1 + sqrt(p/n)``; Gaussian factors scaled by ``1/sqrt(dim)`` stand in for
    orthonormal ones so that generation stays O(np * rank).
    """
    g = rng(seed)
    k = min(rank, n, p)
    edge = 1.0 + np.sqrt(p / n)
    s = 5.0 * edge * 0.97 ** np.arange(k)
    u = g.standard_normal((n, k)) / np.sqrt(n)
    v = g.standard_normal((p, k)) / np.sqrt(p)
    x = g.standard_normal((n, p))
    x /= np.sqrt(n)
    us = u * s
    for lo in range(0, n, 512):  # row chunks keep peak memory near one copy of x
        x[lo : lo + 512] += us[lo : lo + 512] @ v.T
    return x


def run_mode(mode, x, rank, t, seed):
    if mode == "svd":
        return np.linalg.svd(x, full_matrices=False, compute_uv=True)[1]
    if mode == "eig":
        w = np.linalg.eigvalsh(x @ x.T)
        return np.sqrt(np.clip(w[::-1], 0, None))
    d = min(rank, min(x.shape))
    cfg = ArsvdConfig(d_max=d, t_max=t, seed=seed)
    return arsvd_fixed(x, d, t, cfg).s


def time_call(fn, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_bench(sizes, modes=MODES, rank=100, t=2, budget_flops=2e11, repeats=1, seed=0):
    """Time each mode on a Gaussian n x p matrix per ``(n, p)`` in ``sizes``.

    The input is :func:`bench_matrix` with signal rank ``rank``.  Returns a
    list of row dicts ``{mode, n, p, seconds, skipped}``; runs whose
    estimated cost exceeds ``budget_flops`` are not attempted.
    """
    rows = []
    seed = RngSeed.coerce(seed)
    for i, (n, p) in enumerate(sizes):
        x = None
        for mode in modes:
            est = estimated_flops(mode, n, p, rank, t)
            if est > budget_flops:
                rows.append({"mode": mode, "n": n, "p": p, "seconds": float("nan"), "skipped": True})
                continue
            if x is None:
                x = bench_matrix(n, p, rank, seed.child(i))
            secs, _ = time_call(lambda: run_mode(mode, x, rank, t, seed), repeats)
            rows.append({"mode": mode, "n": n, "p": p, "seconds": secs, "skipped": False})
    return rows


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log(ys)`` against ``log(xs)``."""
    xs, ys = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    if xs.size < 2:
        return float("nan")
    return float(np.polyfit(xs, ys, 1)[0])


def slopes(rows, axis="p") -> dict:
    out = {}
    for mode in sorted({r["mode"] for r in rows}):
        done = [r for r in rows if r["mode"] == mode and not r["skipped"]]
        out[mode] = loglog_slope([r[axis] for r in done], [r["seconds"] for r in done]) if len(done) >= 2 else None
    return out
