import numpy as np
import pytest

from arsvd.bench import bench_matrix, estimated_flops, loglog_slope, run_bench, run_mode, slopes


def test_loglog_slope_exact():
    xs = np.array([1.0, 2, 4, 8])
    assert loglog_slope(xs, 3 * xs**1.5) == pytest.approx(1.5)
    assert np.isnan(loglog_slope([1.0], [1.0]))


def test_budget_skips():
    rows = run_bench([(20, 200)], ("svd", "eig", "rsvd"), rank=5, t=1, budget_flops=1.0)
    assert all(r["skipped"] for r in rows) and all(np.isnan(r["seconds"]) for r in rows)


def test_flop_model_orders_modes():
    n, p = 3200, 32000
    assert estimated_flops("rsvd", n, p) < estimated_flops("eig", n, p) < estimated_flops("svd", n, p)
    with pytest.raises(ValueError):
        estimated_flops("qr", 1, 1)


def test_modes_agree_on_top_values():
    x = bench_matrix(200, 2000, 100, 1)
    svd = run_mode("svd", x, 10, 2, 0)[:10]
    eig = run_mode("eig", x, 10, 2, 0)[:10]
    rsvd = run_mode("rsvd", x, 100, 2, 0)[:10]
    assert np.allclose(eig, svd, rtol=1e-8)
    assert np.allclose(rsvd, svd, rtol=1e-4)


def test_slopes_ignore_skipped():
    rows = [
        {"mode": "a", "n": 1, "p": 10, "seconds": 1.0, "skipped": False},
        {"mode": "a", "n": 1, "p": 100, "seconds": 10.0, "skipped": False},
        {"mode": "a", "n": 1, "p": 1000, "seconds": float("nan"), "skipped": True},
        {"mode": "b", "n": 1, "p": 10, "seconds": 1.0, "skipped": False},
    ]
    out = slopes(rows)
    assert out["a"] == pytest.approx(1.0) and out["b"] is None
