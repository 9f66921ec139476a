import numpy as np
import pytest

from risched.channel import (achievable_rates, derive_rng, effective_channel,
                             generate_channels, pathloss_gain, random_phases,
                             rates_from_links, RisConfig, BeamMatrix)
from risched.scheduling import Schedule

from conftest import crandn, toy_config


class TestPathloss:
    def test_direct_100m(self):
        assert pathloss_gain(100.0, "direct") == pytest.approx(10 ** -10.6, rel=1e-12)

    def test_reflected_1m(self):
        assert pathloss_gain(1.0, "reflected") == pytest.approx(1e-3, rel=1e-12)

    def test_direct_10m(self):
        # PL = 32.6 + 36.7 dB
        assert pathloss_gain(10.0, "direct") == pytest.approx(10 ** -6.93, rel=1e-12)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            pathloss_gain(0.0, "direct")
        with pytest.raises(ValueError):
            pathloss_gain(-1.0, "reflected")
        with pytest.raises(ValueError):
            pathloss_gain(1.0, "sideways")


class TestGenerate:
    def test_full_scale_shapes(self):
        cfg = toy_config(M=8, N=128, K=32)
        real = generate_channels(cfg, derive_rng(0, 0))
        assert real.h_d.shape == (32, 8)
        assert real.h_r.shape == (32, 128)
        assert real.G.shape == (8, 128)
        assert real.A.shape == (32, 8, 128)

    def test_cascade_reconstruction_exact(self):
        real = generate_channels(toy_config(), derive_rng(1, 0))
        for k in range(real.num_users):
            # G diag(h_r_k) written as an element-wise column scaling is the
            # same product with no summation, so it reconstructs bit-exactly.
            ref = real.G * real.h_r[k][None, :]
            assert np.linalg.norm(real.A[k] - ref) == 0.0
            dense = real.G @ np.diag(real.h_r[k])
            assert np.allclose(real.A[k], dense, rtol=0, atol=1e-18)

    def test_infinite_rician_factor_is_pure_los(self):
        cfg = toy_config(epsilon=np.inf)
        real = generate_channels(cfg, derive_rng(2, 0))
        # LOS-only reflected channels have constant per-user modulus and G is rank one.
        mags = np.abs(real.h_r)
        assert np.allclose(mags, mags[:, :1])
        s = np.linalg.svd(real.G, compute_uv=False)
        assert s[1] / s[0] < 1e-12

    def test_zero_rician_factor_matches_nlos_variance(self):
        # Degenerate user box pins the path loss so the variance is exact.
        cfg = toy_config(K=1, N=100, epsilon=0.0,
                         user_region=(25.0, 25.0, 17.5, 17.5, -20.0, -20.0))
        rng = derive_rng(3, 0)
        draws = np.concatenate(
            [generate_channels(cfg, rng).h_r[0] for _ in range(1000)])
        d = np.linalg.norm(np.array([25.0, 17.5, -20.0]))
        rho2 = pathloss_gain(d, "reflected")
        var = np.mean(np.abs(draws) ** 2)
        assert abs(var - rho2) / rho2 < 0.05

    def test_determinism_bit_identical(self):
        cfg = toy_config()
        a = generate_channels(cfg, derive_rng(cfg.seed, 7))
        b = generate_channels(cfg, derive_rng(cfg.seed, 7))
        assert np.array_equal(a.h_d, b.h_d)
        assert np.array_equal(a.h_r, b.h_r)
        assert np.array_equal(a.G, b.G)
        assert np.array_equal(a.A, b.A)


class TestEffectiveChannel:
    def test_zero_theta_gives_direct(self, rng):
        h_d = crandn(rng, 3)
        A = crandn(rng, 3, 5)
        assert np.array_equal(effective_channel(h_d, A, np.zeros(5)), h_d)

    def test_zero_cascade_ignores_theta(self, rng):
        h_d = crandn(rng, 3)
        theta = random_phases(5, rng)
        assert np.array_equal(effective_channel(h_d, np.zeros((3, 5)), theta), h_d)

    def test_matches_summation_oracle(self, rng):
        real = generate_channels(toy_config(), derive_rng(4, 0))
        theta = random_phases(4, rng)
        got = effective_channel(real.h_d[2], real.A[2], theta)
        want = real.h_d[2].copy()
        for n in range(4):
            want = want + real.G[:, n] * real.h_r[2, n] * theta[n]
        assert np.allclose(got, want, rtol=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            effective_channel(crandn(rng, 3), crandn(rng, 3, 5), np.ones(4))


class TestRates:
    def test_single_user_unit_snr(self, rng):
        h = crandn(rng, 1, 4)
        w = h[0] / np.linalg.norm(h)       # |h^H w|^2 = ||h||^2
        sigma = np.linalg.norm(h) ** 2
        rates = rates_from_links(h, w[:, None], sigma)
        assert rates[0] == pytest.approx(1.0, rel=1e-12)

    def test_orthogonal_users_no_cross_terms(self):
        h = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex)
        W = h.conj().T * 2.0
        rates = rates_from_links(h, W, 0.5)
        single = np.log2(1 + 4.0 / 0.5)
        assert np.allclose(rates, single, rtol=1e-12)

    def test_matches_scalar_oracle(self, rng):
        h = crandn(rng, 2, 2)
        W = crandn(rng, 2, 2)
        sigma = 0.3
        rates = rates_from_links(h, W, sigma)
        for k in range(2):
            sig = abs(np.vdot(h[k], W[:, k])) ** 2
            other = abs(np.vdot(h[k], W[:, 1 - k])) ** 2
            want = np.log2(1 + sig / (other + sigma))
            assert rates[k] == pytest.approx(want, rel=1e-12)

    def test_unscheduled_rate_zero_and_nonnegative(self, rng):
        real = generate_channels(toy_config(), derive_rng(5, 0))
        theta = random_phases(4, rng)
        sched = Schedule.from_users([2, 0], 4)
        W = crandn(rng, 2, 2) * 1e-6
        rates = achievable_rates(real, theta, W, sched, 1e-13)
        assert rates[1] == 0.0 and rates[3] == 0.0
        assert np.all(rates >= 0.0)

    def test_amplitude_scaling_invariance(self, rng):
        h = crandn(rng, 3, 4)
        W = crandn(rng, 4, 3)
        sigma = 0.7
        base = rates_from_links(h, W, sigma)
        scaled = rates_from_links(1e3 * h, W, 1e6 * sigma)
        assert np.allclose(base, scaled, rtol=1e-9)

    def test_sigma_must_be_positive(self, rng):
        with pytest.raises(ValueError):
            rates_from_links(crandn(rng, 1, 2), crandn(rng, 2, 1), 0.0)

    def test_beam_column_alignment_checked(self, rng):
        real = generate_channels(toy_config(), derive_rng(6, 0))
        sched = Schedule.from_users([0, 1], 4)
        with pytest.raises(ValueError):
            achievable_rates(real, random_phases(4, rng), crandn(rng, 2, 3),
                             sched, 1e-13)


class TestDomainTypes:
    def test_ris_config_enforces_unit_modulus(self):
        RisConfig(theta=np.exp(1j * np.linspace(0, 3, 5)))
        with pytest.raises(ValueError):
            RisConfig(theta=np.array([1.0 + 0j, 0.5]))

    def test_beam_matrix_power(self, rng):
        W = crandn(rng, 3, 2)
        bm = BeamMatrix(W=W)
        assert bm.total_power == pytest.approx(np.sum(np.abs(W) ** 2))
        bm.check_power(bm.total_power + 1e-12)
        with pytest.raises(ValueError):
            bm.check_power(bm.total_power / 2)
