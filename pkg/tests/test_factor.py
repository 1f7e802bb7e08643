import numpy as np
import pytest

from arsvd.core import RngSeed, gaussian_matrix, svd_exact
from arsvd.factor import ArsvdConfig, arsvd_adaptive, arsvd_fixed, power_blocks, project_and_factor

from conftest import low_rank, max_angle


class TestConfig:
    def test_defaults(self):
        cfg = ArsvdConfig()
        assert (cfg.d_max, cfg.t_max, cfg.delta, cfg.n_projections) == (20, 10, 10, 5)

    @pytest.mark.parametrize("kw", [{"d_max": 0}, {"t_max": 0}, {"delta": -1}, {"n_projections": 1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ArsvdConfig(**kw)

    def test_width_clamped(self):
        cfg = ArsvdConfig(d_max=20, delta=10)
        assert cfg.width((500, 400)) == 30 and not cfg.clamped((500, 400))
        assert cfg.width((25, 400)) == 25 and cfg.clamped((25, 400))


class TestPowerBlocks:
    def test_orthonormal_and_incremental(self):
        x = gaussian_matrix(60, 40, 1)
        blocks = power_blocks(x, ArsvdConfig(d_max=5, t_max=4, seed=3))
        assert [b.t for b in blocks] == [1, 2, 3, 4]
        for b in blocks:
            assert np.abs(b.basis.T @ b.basis - np.eye(15)).max() <= 1e-8
            assert np.allclose(b.projected, x.T @ b.basis)

    def test_identity_keeps_omega_span(self):
        cfg = ArsvdConfig(d_max=3, delta=2, t_max=3, seed=8)
        blocks = power_blocks(np.eye(12), cfg)
        omega = gaussian_matrix(12, 5, cfg.seed)
        assert max_angle(blocks[-1].basis, omega) <= 1e-10
        assert np.allclose(project_and_factor(blocks[-1], 5).s, 1.0)

    def test_rank_one_alignment(self):
        x, u, _ = low_rank(50, 30, [4.0], 2)
        for b in power_blocks(x, ArsvdConfig(d_max=1, delta=0, t_max=4, seed=1))[1:]:
            assert abs(b.basis[:, 0] @ u[:, 0]) >= 1 - 1e-8

    def test_converges_to_top_singular_space(self):
        g = np.random.default_rng(0)
        u, _ = np.linalg.qr(g.standard_normal((100, 80)))
        v, _ = np.linalg.qr(g.standard_normal((80, 80)))
        s = np.concatenate([np.linspace(10, 5, 10), np.linspace(1.25, 0.1, 70)])  # gap ratio 4 at l = 10
        x = (u * s) @ v.T
        blocks = power_blocks(x, ArsvdConfig(d_max=5, delta=5, t_max=6, seed=4))
        assert max_angle(blocks[5].basis, u[:, :10]) <= 1e-3

    def test_zero_input_flagged(self):
        blocks = power_blocks(np.zeros((10, 8)), ArsvdConfig(d_max=2, delta=1, t_max=2))
        assert all(b.zero_input for b in blocks)
        assert np.abs(blocks[0].basis.T @ blocks[0].basis - np.eye(3)).max() <= 1e-12


class TestFixed:
    def test_diagonal(self):
        x = np.zeros((10, 10))
        x[0, 0], x[1, 1] = 5.0, 3.0
        f = arsvd_fixed(x, 2, 3)
        assert np.allclose(f.s, [5, 3], rtol=1e-6)

    def test_matches_exact_on_noise(self):
        x = gaussian_matrix(60, 40, 21)
        f = arsvd_fixed(x, 10, 10, ArsvdConfig(d_max=10, t_max=10, seed=2))
        assert np.allclose(f.s, svd_exact(x).s[:10], rtol=1e-4)

    def test_factor_shapes_and_orthonormality(self):
        x = gaussian_matrix(70, 30, 2)
        f = arsvd_fixed(x, 6, 2, ArsvdConfig(d_max=6, t_max=2, seed=1))
        assert f.u.shape == (70, 6) and f.v.shape == (30, 6) and f.rank == 6 and f.iterations == 2
        assert np.abs(f.u.T @ f.u - np.eye(6)).max() <= 1e-6
        assert np.abs(f.v.T @ f.v - np.eye(6)).max() <= 1e-6
        assert np.all(np.diff(f.s) <= 0)

    def test_sign_convention(self):
        f = arsvd_fixed(gaussian_matrix(40, 30, 5), 4, 2, ArsvdConfig(d_max=4, t_max=2))
        idx = np.argmax(np.abs(f.u), axis=0)
        assert np.all(f.u[idx, np.arange(4)] > 0)

    def test_wide_matrix(self):
        x, _, _ = low_rank(30, 200, [9, 7, 5], 3)
        f = arsvd_fixed(x, 3, 2, ArsvdConfig(d_max=3, t_max=2))
        assert np.allclose(f.reconstruct(), x, atol=1e-10)

    def test_out_of_range(self):
        cfg = ArsvdConfig(d_max=3, delta=2, t_max=2)
        x = gaussian_matrix(20, 20, 0)
        with pytest.raises(ValueError):
            arsvd_fixed(x, 6, 1, cfg)
        with pytest.raises(ValueError):
            arsvd_fixed(x, 2, 3, cfg)
        with pytest.raises(ValueError):
            arsvd_fixed(x, 0, 1, cfg)

    def test_shrinkage_never_exceeds_exact(self):
        for seed in range(5):
            x = gaussian_matrix(80, 60, seed)
            exact = svd_exact(x).s
            for t in (1, 2, 5):
                f = arsvd_fixed(x, 8, t, ArsvdConfig(d_max=8, t_max=5, seed=seed))
                assert np.all(f.s <= exact[:8] * (1 + 1e-6))

    def test_reconstruction_gap(self):
        for seed in range(3):
            x, _, _ = low_rank(200, 200, np.linspace(20, 5, 8), seed)
            x = x + 0.5 * gaussian_matrix(200, 200, seed + 10) / np.sqrt(200)
            f = arsvd_fixed(x, 8, 10, ArsvdConfig(d_max=8, t_max=10, seed=seed))
            e = svd_exact(x)
            best = np.linalg.norm(x - (e.u[:, :8] * e.s[:8]) @ e.v[:, :8].T)
            assert np.linalg.norm(x - f.reconstruct()) <= 1.1 * best

    def test_deterministic(self):
        x = gaussian_matrix(50, 40, 3)
        cfg = ArsvdConfig(d_max=5, t_max=3, seed=RngSeed(17))
        a, b = arsvd_fixed(x, 5, 3, cfg), arsvd_fixed(x, 5, 3, cfg)
        assert np.array_equal(a.u, b.u) and np.array_equal(a.s, b.s) and np.array_equal(a.v, b.v)


class TestAdaptive:
    def test_noiseless_rank_five_close(self):
        for seed in range(4):
            x, _, _ = low_rank(200, 150, [50, 40, 30, 20, 10], seed)
            f, report = arsvd_adaptive(x, ArsvdConfig(d_max=20, seed=seed))
            assert report.t_star == 1
            assert 5 <= report.d_star <= 6
            assert np.allclose(f.s[:5], svd_exact(x).s[:5], rtol=1e-6)

    @pytest.mark.xfail(
        strict=True,
        reason="measured over 12 seeds: d* = 5 in 6, d* = 6 in 6; once the 5 signal scores are "
        "perfectly separated, moving the largest null-space score into the signal group keeps the "
        "separation and the more balanced split has a smaller rank-sum p",
    )
    def test_noiseless_rank_five_exact(self):
        for seed in range(5):
            x, _, _ = low_rank(200, 150, [50, 40, 30, 20, 10], seed)
            _, report = arsvd_adaptive(x, ArsvdConfig(d_max=20, seed=seed))
            assert report.d_star == 5

    def test_zero_matrix(self):
        f, report = arsvd_adaptive(np.zeros((30, 20)), ArsvdConfig(d_max=8, t_max=3))
        assert report.d_star == 0 and f.rank == 0
        assert "degenerate" in report.flags
        assert f.u.shape == (30, 0) and f.reconstruct().shape == (30, 20)

    @pytest.mark.slow
    def test_kappa_two_rank_thirty(self):
        from arsvd.simgen import LowRankSimConfig, sim_lowrank

        x, _ = sim_lowrank(LowRankSimConfig(500, 500, 30, 2.0, seed=5))
        _, report = arsvd_adaptive(x, ArsvdConfig(d_max=60, seed=5))
        assert abs(report.d_star - 30) <= 2
