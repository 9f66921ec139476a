import numpy as np
import pytest

from risched.channel import derive_rng, generate_channels, random_phases
from risched.estimation import (LmmseStats, calibrate_stats,
                                fit_lmmse_stats, fit_stats_from_samples,
                                high_dim_matrix, lmmse_estimate_combined,
                                lmmse_estimate_high_dim, load_stats, save_stats,
                                stats_cache_key)
from risched.pilots import (PilotBlock, decorrelate_collect, make_pilots,
                            receive_pilot_block, uplink_receive_subframe)

from conftest import crandn, toy_config


def dense_lmmse_oracle(stats, Q, sigma_eff2, B):
    """Textbook per-row LMMSE via explicit inverses; independent of the
    shared-combiner implementation."""
    mu, C = stats.mu, stats.cov
    D = Q.shape[1]
    out = np.empty((B.shape[0], mu.shape[0]), dtype=complex)
    C_bb = Q.T @ C @ Q.conj() + sigma_eff2 * np.eye(D)
    C_bb = C_bb + stats.eps_reg * np.trace(C_bb).real / D * np.eye(D)
    C_ab = C @ Q.conj()
    inv = np.linalg.inv(C_bb)
    for m in range(B.shape[0]):
        b = B[m]
        out[m] = mu + C_ab @ inv @ (b - Q.T @ mu)
    return out


def make_high_dim_block(cfg, D, sigma, rng, seed=14):
    real = generate_channels(cfg, derive_rng(seed, 0))
    X = make_pilots(cfg.K, cfg.P_u)
    phases = np.stack([random_phases(cfg.N, rng) for _ in range(D)])
    raw = [uplink_receive_subframe(real, phases[d], X, sigma, rng) for d in range(D)]
    return real, decorrelate_collect(raw, X, phases)


def make_combined_block(h_c, theta, P_u, D, sigma, rng):
    U, M = h_c.shape
    X = make_pilots(M, P_u)[:, :U]
    raw = [receive_pilot_block(h_c, X, sigma, rng) for _ in range(D)]
    return decorrelate_collect(raw, X, np.tile(theta, (D, 1)))


class TestFit:
    def test_identical_samples_return_mean(self, rng):
        # Degenerate ensemble: every pooled sample equal -> zero covariance,
        # so the estimator ignores the observations and returns the mean.
        cfg = toy_config(M=2, N=3)
        x = crandn(rng, 1, cfg.N + 1)
        stats = fit_stats_from_samples(np.tile(x, (50, 1)), "high_dim")
        assert np.abs(stats.cov).max() < 1e-30 * np.abs(x).max() ** 2 + 1e-300
        _, block = make_high_dim_block(cfg, 2, cfg.sigma_u2, rng)
        est = lmmse_estimate_high_dim(block, stats, cfg.sigma_u2)
        for k in range(cfg.K):
            assert np.allclose(est[k], np.tile(stats.mu, (cfg.M, 1)),
                               atol=1e-12 * np.abs(x).max())

    def test_synthetic_gaussian_covariance(self, rng):
        dim = 4
        Lf = crandn(rng, dim, dim)
        C0 = Lf @ Lf.conj().T              # x = Lf z has E[x x^H] = Lf Lf^H
        X = crandn(rng, 10000, dim) @ Lf.T
        stats = fit_stats_from_samples(X, "high_dim", min_factor=10)
        err = np.linalg.norm(stats.cov - C0) / np.linalg.norm(C0)
        assert err < 0.05

    def test_too_small_ensemble_refused(self, rng):
        cfg = toy_config(M=2, N=8, K=2)
        with pytest.raises(ValueError):
            fit_lmmse_stats([generate_channels(cfg, rng)], "high_dim")

    def test_dimension_mismatch_rejected(self, rng):
        cfg = toy_config(M=2, N=3)
        stats = calibrate_stats(cfg, "high_dim")
        other = toy_config(M=2, N=5, D_theta=3)
        _, block = make_high_dim_block(other, 3, other.sigma_u2, rng)
        with pytest.raises(ValueError):
            lmmse_estimate_high_dim(block, stats, other.sigma_u2)

    def test_combined_needs_rng(self):
        cfg = toy_config()
        with pytest.raises(ValueError):
            fit_lmmse_stats([generate_channels(cfg, derive_rng(0, 0))] * 40, "combined")


class TestHighDim:
    def test_noiseless_full_rank_recovery(self, rng):
        cfg = toy_config(M=2, N=6, K=3, D_theta=7)
        stats = calibrate_stats(cfg, "high_dim")
        real, block = make_high_dim_block(cfg, 7, 0.0, rng)
        est = lmmse_estimate_high_dim(block, stats, 0.0)
        for k in range(cfg.K):
            H = high_dim_matrix(real, k)
            assert np.linalg.norm(est[k] - H) / np.linalg.norm(H) < 1e-6

    def test_infinite_noise_returns_prior_mean(self, rng):
        cfg = toy_config(M=2, N=3)
        stats = calibrate_stats(cfg, "high_dim")
        _, block = make_high_dim_block(cfg, 3, cfg.sigma_u2, rng)
        est = lmmse_estimate_high_dim(block, stats, 1e12)
        for k in range(cfg.K):
            assert np.allclose(est[k], np.tile(stats.mu, (cfg.M, 1)),
                               atol=1e-6 * np.abs(stats.mu).max())

    def test_matches_dense_oracle(self, rng):
        cfg = toy_config(M=2, N=3, D_theta=4)
        stats = calibrate_stats(cfg, "high_dim")
        _, block = make_high_dim_block(cfg, 4, cfg.sigma_u2, rng)
        est = lmmse_estimate_high_dim(block, stats, cfg.sigma_u2)
        Q = np.concatenate([np.ones((1, 4)), block.uplink_phases.T], axis=0)
        for k in range(cfg.K):
            want = dense_lmmse_oracle(stats, Q, cfg.sigma_u2 / block.scale, block.Y[k])
            assert np.allclose(est[k], want, rtol=1e-9)

    def test_mse_not_worse_than_least_squares(self, rng):
        # Over a matched ensemble, LMMSE beats the (min-norm) LS row solve.
        cfg = toy_config(M=2, N=4, K=2, D_theta=5)
        stats = calibrate_stats(cfg, "high_dim")
        se_lmmse, se_ls = 0.0, 0.0
        for trial in range(300):
            real, block = make_high_dim_block(cfg, 5, cfg.sigma_u2, rng, seed=1000 + trial)
            est = lmmse_estimate_high_dim(block, stats, cfg.sigma_u2)
            Q = np.concatenate([np.ones((1, 5)), block.uplink_phases.T], axis=0)
            pinv = np.linalg.pinv(Q.T)
            for k in range(cfg.K):
                H = high_dim_matrix(real, k)
                se_lmmse += np.linalg.norm(est[k] - H) ** 2
                ls = (pinv @ block.Y[k].T).T
                se_ls += np.linalg.norm(ls - H) ** 2
        assert se_lmmse <= se_ls

    def test_mse_monotone_in_depth(self, rng):
        cfg = toy_config(M=2, N=4, K=2, D_theta=6)
        stats = calibrate_stats(cfg, "high_dim")
        errs = {d: 0.0 for d in (2, 4, 6)}
        for trial in range(200):
            real, block = make_high_dim_block(cfg, 6, cfg.sigma_u2, rng, seed=2000 + trial)
            for d in errs:
                est = lmmse_estimate_high_dim(block.prefix(d), stats, cfg.sigma_u2)
                for k in range(cfg.K):
                    errs[d] += np.linalg.norm(est[k] - high_dim_matrix(real, k)) ** 2
        assert errs[6] <= errs[4] <= errs[2]

    def test_orthogonality_principle(self, rng):
        # Error is uncorrelated with the observations within 3 standard errors.
        cfg = toy_config(M=2, N=3, K=2, D_theta=4)
        stats = calibrate_stats(cfg, "high_dim", n_realizations=200)
        prods = []
        for trial in range(400):
            real, block = make_high_dim_block(cfg, 4, cfg.sigma_u2, rng, seed=3000 + trial)
            est = lmmse_estimate_high_dim(block, stats, cfg.sigma_u2)
            for k in range(cfg.K):
                err = est[k] - high_dim_matrix(real, k)
                prods.append((err.conj()[:, :, None] * block.Y[k][:, None, :]).ravel())
        prods = np.array(prods)
        scale = np.sqrt(np.mean(np.abs(prods) ** 2, axis=0))
        mean = prods.mean(axis=0)
        sem = np.std(prods, axis=0) / np.sqrt(prods.shape[0])
        assert np.all(np.abs(mean) <= 3.0 * sem + 1e-12 * scale)


class TestCombined:
    def _setup(self, rng, sigma, D, seed=30):
        cfg = toy_config(M=2, N=4, K=3)
        stats = calibrate_stats(cfg, "combined")
        real = generate_channels(cfg, derive_rng(seed, 0))
        theta = random_phases(cfg.N, derive_rng(seed, 1))
        users = [0, 2]
        h_c = real.h_d[users] + np.einsum("kmn,n->km", real.A[users], theta)
        block = make_combined_block(h_c, theta, cfg.P_u, D, sigma, rng)
        return cfg, stats, h_c, theta, block

    def test_noiseless_exact(self, rng):
        cfg, stats, h_c, _, block = self._setup(rng, 0.0, 2)
        est = lmmse_estimate_combined(block, stats, 0.0)
        assert np.allclose(est, h_c, rtol=1e-6)

    def test_mixed_theta_rejected(self, rng):
        cfg, stats, h_c, theta, block = self._setup(rng, 0.0, 2)
        bad = PilotBlock(Y=block.Y,
                         uplink_phases=np.stack([theta, -theta]),
                         D=2, scale=block.scale)
        with pytest.raises(ValueError):
            lmmse_estimate_combined(bad, stats, 0.0)

    def test_depth_two_halves_noise(self, rng):
        # D_W = 2 halves the effective noise; the MSE ratio across depths
        # tracks the analytic LMMSE ratio (the absolute level carries the
        # plug-in error of the finite calibration ensemble, the ratio not).
        cfg = toy_config(M=2, N=4, K=3)
        stats = calibrate_stats(cfg, "combined", n_realizations=300)
        sigma = 2e-13
        mse = {1: 0.0, 2: 0.0}
        trials = 600
        for trial in range(trials):
            real = generate_channels(cfg, derive_rng(40, trial))
            theta = random_phases(cfg.N, derive_rng(41, trial))
            h_c = real.h_d + np.einsum("kmn,n->km", real.A, theta)
            h_c = h_c[: cfg.M]
            for D in mse:
                block = make_combined_block(h_c, theta, cfg.P_u, D, sigma, rng)
                est = lmmse_estimate_combined(block, stats, sigma)
                mse[D] += np.sum(np.abs(est - h_c) ** 2) / trials

        def analytic(D):
            s_eff = sigma / (cfg.M * cfg.P_u) / D
            C = stats.cov
            E = C - C @ np.linalg.inv(C + s_eff * np.eye(cfg.M)) @ C
            return cfg.M * np.trace(E).real   # M scheduled users

        assert mse[2] < mse[1]
        ratio = mse[2] / mse[1]
        want = analytic(2) / analytic(1)
        assert abs(ratio - want) / want < 0.10

    def test_white_prior_reduces_to_scaled_average(self, rng):
        M, P_u, sigma, D = 2, 1.0, 0.5, 3
        c = 2.0
        stats = LmmseStats(kind="combined", mu=np.zeros(M, dtype=complex),
                           cov=c * np.eye(M, dtype=complex), ensemble_size=100)
        h_c = crandn(rng, 2, M)
        theta = random_phases(4, rng)
        block = make_combined_block(h_c, theta, P_u, D, sigma, rng)
        est = lmmse_estimate_combined(block, stats, sigma)
        s_eff = sigma / (M * P_u) / D
        factor = c / (c + s_eff)
        want = factor * block.Y.mean(axis=2)
        assert np.allclose(est, want, rtol=1e-6)


class TestCache:
    def test_round_trip(self, tmp_path):
        cfg = toy_config(M=2, N=3)
        stats = calibrate_stats(cfg, "high_dim")
        path = tmp_path / "s.npz"
        save_stats(stats, path)
        back = load_stats(path)
        assert back.kind == stats.kind
        assert np.array_equal(back.mu, stats.mu)
        assert np.array_equal(back.cov, stats.cov)
        assert back.ensemble_size == stats.ensemble_size

    def test_key_depends_on_geometry_and_seed(self):
        a = toy_config(seed=1)
        b = toy_config(seed=2)
        c = toy_config(seed=1, N=8)
        k = stats_cache_key(a, "high_dim", 100)
        assert k != stats_cache_key(b, "high_dim", 100)
        assert k != stats_cache_key(c, "high_dim", 100)
        assert k == stats_cache_key(toy_config(seed=1), "high_dim", 100)
