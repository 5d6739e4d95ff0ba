import math

import numpy as np
import pytest

from gfra import channel as ch
from gfra.config import RadioConfig


class TestReceivedPower:
    def test_reference_distance_no_shadowing(self):
        radio = RadioConfig()
        budget = ch.received_power(1.0, radio, shadow_draw=0.0)
        expected = 0.075 * (0.125 / (4 * math.pi)) ** 2
        assert budget.P_i == pytest.approx(expected, rel=1e-12)
        assert budget.gamma_i == 1.0

    def test_reference_power_value(self):
        # independently computed: 0.075 * (0.125 / 4pi)^2
        budget = ch.received_power(1.0, RadioConfig(), 0.0)
        assert budget.P_i == pytest.approx(7.420985130054036e-06, rel=1e-9)

    def test_pathloss_exponent(self):
        radio = RadioConfig(beta=2.1)
        ref = ch.received_power(1.0, radio, 0.0).P_i
        doubled = ch.received_power(2.0, radio, 0.0).P_i
        assert doubled / ref == pytest.approx(2.0 ** -2.1, rel=1e-12)

    def test_shadowing_is_lognormal_in_db(self):
        radio = RadioConfig(sigma_dB=9.0)
        budget = ch.received_power(1.0, radio, shadow_draw=1.0)
        assert budget.gamma_i == pytest.approx(10.0 ** 0.9, rel=1e-12)

    def test_nonpositive_distance_rejected(self):
        with pytest.raises(ValueError):
            ch.received_power(0.0, RadioConfig(), 0.0)


class TestRicianParams:
    def test_zero_k_is_rayleigh(self, rng):
        mu, sigma2 = ch.rician_params(1.0, 0.0, rng)
        assert mu == 0.0
        assert sigma2 == 0.5

    def test_identity_check(self, rng):
        mu, sigma2 = ch.rician_params(2.0, 1.0, rng)
        assert sigma2 == pytest.approx(0.5)
        assert abs(mu) == pytest.approx(1.0)

    def test_round_trip_at_4db(self, rng):
        K = 10.0 ** 0.4  # 4 dB
        assert K == pytest.approx(2.5118864315095801, rel=1e-12)
        P = 3.7e-9
        mu, sigma2 = ch.rician_params(P, K, rng)
        assert 2 * sigma2 * (K + 1) == pytest.approx(P, rel=1e-12)
        assert abs(mu) ** 2 / (2 * sigma2) == pytest.approx(K, rel=1e-12)

    def test_phase_uniform(self, rng):
        phases = [np.angle(ch.rician_params(1.0, 5.0, rng)[0]) for _ in range(4000)]
        # circular mean of a uniform phase should vanish
        assert abs(np.mean(np.exp(1j * np.array(phases)))) < 0.05


class TestDrawChannel:
    def test_deterministic_los(self, rng):
        budget = ch.LinkBudget(d_i=1, gamma_i=1, P_i=1, K_i=1,
                               mu_i=0.3 - 0.4j, sigma_i2=0.0)
        real = ch.draw_channel(budget, R=4, rng=rng)
        np.testing.assert_array_equal(real.h, np.full(4, 0.3 - 0.4j))

    def test_mean_and_power(self, rng):
        mu, sigma2 = 0.6 + 0.8j, 0.25
        budget = ch.LinkBudget(d_i=1, gamma_i=1, P_i=2 * sigma2 * 2, K_i=1.0,
                               mu_i=mu, sigma_i2=sigma2)
        draws = np.stack([ch.draw_channel(budget, 1, rng).h[0]
                          for _ in range(100_000)])
        se_mean = math.sqrt(sigma2 / draws.size)
        assert abs(draws.mean() - mu) < 3 * se_mean * math.sqrt(2)
        power = np.abs(draws) ** 2
        expected_power = abs(mu) ** 2 + 2 * sigma2
        assert abs(power.mean() - expected_power) < 3 * power.std() / math.sqrt(draws.size)

    def test_empirical_k_factor_within_5_percent(self, rng):
        K = 10.0 ** 0.4
        mu, sigma2 = ch.rician_params(1.0, K, rng)
        budget = ch.LinkBudget(d_i=1, gamma_i=1, P_i=1.0, K_i=K,
                               mu_i=mu, sigma_i2=sigma2)
        draws = np.stack([ch.draw_channel(budget, 1, rng).h[0]
                          for _ in range(100_000)])
        mu_hat = draws.mean()
        sigma2_hat = 0.5 * (draws.real.var() + draws.imag.var())
        k_hat = abs(mu_hat) ** 2 / (2 * sigma2_hat)
        assert k_hat == pytest.approx(K, rel=0.05)

    def test_independent_across_calls(self, rng):
        budget = ch.LinkBudget(d_i=1, gamma_i=1, P_i=1, K_i=0.0,
                               mu_i=0.0, sigma_i2=0.5)
        a = ch.draw_channel(budget, 4, rng).h
        b = ch.draw_channel(budget, 4, rng).h
        assert not np.allclose(a, b)


class TestAwgn:
    def test_zero_variance_identity(self, rng):
        clean = rng.standard_normal((2, 64)) + 1j * rng.standard_normal((2, 64))
        out = ch.apply_awgn(clean, 0.0, rng)
        np.testing.assert_array_equal(out, clean)

    def test_noise_variance(self, rng):
        sigma_w2 = 2.5e-3
        noise = ch.apply_awgn(np.zeros((1, 1_000_000), dtype=complex),
                              sigma_w2, rng)
        assert np.mean(np.abs(noise) ** 2) == pytest.approx(sigma_w2, rel=0.05)

    def test_circular_symmetry_split(self, rng):
        sigma_w2 = 1.0
        noise = ch.apply_awgn(np.zeros((1, 500_000), dtype=complex), sigma_w2, rng)
        assert noise.real.var() == pytest.approx(sigma_w2 / 2, rel=0.05)
        assert noise.imag.var() == pytest.approx(sigma_w2 / 2, rel=0.05)

    def test_negative_variance_rejected(self, rng):
        with pytest.raises(ValueError):
            ch.apply_awgn(np.zeros((1, 4), dtype=complex), -1.0, rng)


def test_distance_floor(rng):
    radio = RadioConfig()
    draws = [ch.draw_distance(radio, rng) for _ in range(5000)]
    assert min(draws) >= ch.D_MIN
    assert max(draws) <= radio.d_max
