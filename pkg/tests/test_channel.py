import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import crandn
from losence import dsp
from losence.channel import (
    ChannelConfig,
    ChannelRealization,
    Scenario,
    add_awgn,
    apply_channel,
    sample_channel,
    sample_scenario,
    to_padded_cir,
)
from oracles import unnormalized_dft

N, L_CP = 512, 64


def realization(taps, scenario=Scenario.NLOS):
    delays, gains = zip(*taps)
    return ChannelRealization(
        delays=np.array(delays),
        los_gains=np.zeros(len(gains), dtype=complex),
        nlos_gains=np.array(gains, dtype=complex),
        scenario=scenario,
        rician_k=0.0,
        large_scale_g=1.0,
    )


class TestScenario:
    @pytest.mark.parametrize("r, expected", [(1.0, Scenario.LOS), (0.0, Scenario.NLOS)])
    def test_degenerate_probabilities(self, rng, r, expected):
        assert all(sample_scenario(rng, r) is expected for _ in range(200))

    def test_los_fraction(self, rng):
        draws = [sample_scenario(rng, 0.8) is Scenario.LOS for _ in range(100_000)]
        assert np.mean(draws) == pytest.approx(0.8, abs=0.01)

    @pytest.mark.parametrize("r", [-0.1, 1.3])
    def test_invalid_r(self, rng, r):
        with pytest.raises(ValueError):
            sample_scenario(rng, r)


class TestConfig:
    def test_defaults(self):
        cfg = ChannelConfig()
        assert (cfg.N, cfg.L_cp, cfg.tap_line_length, cfg.P, cfg.r) == (512, 64, 20, 10, 0.8)
        assert cfg.k_range == (3.0, 13.0) and cfg.g_range == (0.1, 1.0)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(P=21), dict(P=0), dict(tap_line_length=70), dict(L_cp=512), dict(r=1.5)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ChannelConfig(**kwargs)


class TestSampleChannel:
    def test_nlos_has_no_los_component(self, rng):
        cfg = ChannelConfig()
        for _ in range(50):
            ch = sample_channel(rng, cfg, Scenario.NLOS)
            assert ch.rician_k == 0.0
            assert ch.scenario is Scenario.NLOS

    def test_structure(self, rng):
        cfg = ChannelConfig()
        for sc in Scenario:
            for _ in range(200):
                ch = sample_channel(rng, cfg, sc)
                assert ch.num_paths == cfg.P
                assert ch.delays[0] == 0
                assert len(set(ch.delays.tolist())) == cfg.P
                assert ch.delays.max() < cfg.tap_line_length <= cfg.L_cp
                assert 0.1 <= ch.large_scale_g <= 1.0
                if sc is Scenario.LOS:
                    assert 3.0 <= ch.rician_k <= 13.0
                else:
                    assert ch.rician_k == 0.0

    def test_k_mean(self, rng):
        cfg = ChannelConfig()
        ks = [sample_channel(rng, cfg, Scenario.LOS).rician_k for _ in range(100_000)]
        assert np.mean(ks) == pytest.approx(8.0, abs=0.1)

    def test_los_nlos_power_gap(self):
        # k = 13, g = 1: k/(k+1) against 1/(k+1).
        k = 13.0
        gap_db = 10 * math.log10(k / (k + 1) / (1 / (k + 1)))
        assert k / (k + 1) == pytest.approx(0.929, abs=1e-3)
        assert gap_db == pytest.approx(11.1, abs=0.05)

    @pytest.mark.parametrize("unit_variance", [False, True])
    def test_power_budget(self, unit_variance):
        k = 8.0
        cfg = ChannelConfig(g_range=(1.0, 1.0), k_range=(k, k), nlos_unit_variance=unit_variance)
        rng = np.random.default_rng(7)
        chs = [sample_channel(rng, cfg, Scenario.LOS) for _ in range(100_000)]
        los_p = np.mean([np.sum(np.abs(c.los_gains) ** 2) for c in chs])
        nlos_p = np.mean([np.sum(np.abs(c.nlos_gains) ** 2) for c in chs])
        assert los_p == pytest.approx(k / (k + 1), rel=0.02)
        scale = cfg.P if unit_variance else 1.0
        assert nlos_p == pytest.approx(scale / (k + 1), rel=0.02)

    def test_los_component_on_delay_zero_only(self, rng):
        ch = sample_channel(rng, ChannelConfig(), Scenario.LOS)
        k, g = ch.rician_k, ch.large_scale_g
        assert abs(ch.los_gains[0]) == pytest.approx(g * math.sqrt(k / (k + 1)))
        assert np.all(ch.los_gains[1:] == 0)

    def test_nlos_power(self):
        cfg = ChannelConfig(g_range=(1.0, 1.0))
        rng = np.random.default_rng(8)
        p = [np.sum(np.abs(sample_channel(rng, cfg, Scenario.NLOS).gains) ** 2) for _ in range(100_000)]
        assert np.mean(p) == pytest.approx(1.0, rel=0.02)

    def test_reproducible(self):
        cfg = ChannelConfig()
        a = [sample_channel(np.random.default_rng(3), cfg, Scenario.LOS) for _ in range(2)]
        assert_array_equal(a[0].gains, a[1].gains)
        assert_array_equal(a[0].delays, a[1].delays)

    def test_too_many_paths(self, rng):
        cfg = ChannelConfig()
        object.__setattr__(cfg, "P", 25)
        with pytest.raises(ValueError):
            sample_channel(rng, cfg, Scenario.LOS)


class TestPaddedCir:
    def test_examples(self):
        assert_array_equal(to_padded_cir(realization([(0, 1 + 0j)]), 8), [1, 0, 0, 0, 0, 0, 0, 0])
        assert_array_equal(to_padded_cir(realization([(2, 1j)]), 4), [0, 0, 1j, 0])

    def test_sparsity(self, rng):
        ch = sample_channel(rng, ChannelConfig(), Scenario.NLOS)
        h = to_padded_cir(ch, N)
        assert np.count_nonzero(h) == 10
        assert np.all(h[L_CP:] == 0)


class TestApplyChannel:
    def frame(self, rng):
        x_td = dsp.idft(dsp.qam4_modulate(rng.integers(0, 2, 2 * N)))
        return x_td, dsp.add_cyclic_prefix(x_td, L_CP)

    def test_identity(self, rng):
        _, s = self.frame(rng)
        assert_allclose(apply_channel(realization([(0, 1)]), s, N, L_CP), s)

    @pytest.mark.parametrize("d", [1, 5, 19, 64])
    def test_single_delay_is_cyclic_shift(self, rng, d):
        x_td, s = self.frame(rng)
        y = dsp.remove_cyclic_prefix(apply_channel(realization([(d, 1)]), s, N, L_CP), N, L_CP)
        assert_allclose(y, np.roll(x_td, d), atol=1e-15)

    def test_frequency_diagonalization(self, rng):
        ch = sample_channel(rng, ChannelConfig(), Scenario.LOS)
        x_fd = dsp.qam4_modulate(rng.integers(0, 2, 2 * N))
        s = dsp.add_cyclic_prefix(dsp.idft(x_fd), L_CP)
        y_fd = dsp.dft(dsp.remove_cyclic_prefix(apply_channel(ch, s, N, L_CP), N, L_CP))
        H = unnormalized_dft(to_padded_cir(ch, N), N)
        assert_allclose(y_fd, H * x_fd, atol=1e-10)

    def test_matches_circular_convolution(self, rng):
        ch = sample_channel(rng, ChannelConfig(), Scenario.NLOS)
        x_td, s = self.frame(rng)
        y = dsp.remove_cyclic_prefix(apply_channel(ch, s, N, L_CP), N, L_CP)
        assert_allclose(y, dsp.circular_convolve(to_padded_cir(ch, N)[:20], x_td), atol=1e-14)

    def test_delay_beyond_cp(self, rng):
        _, s = self.frame(rng)
        with pytest.raises(ValueError):
            apply_channel(realization([(65, 1)]), s, N, L_CP)

    def test_wrong_frame_length(self, rng):
        with pytest.raises(ValueError):
            apply_channel(realization([(0, 1)]), crandn(rng, N), N, L_CP)


class TestAwgn:
    def test_noiseless(self, rng):
        x = crandn(rng, 32)
        y, var = add_awgn(x, math.inf, 1.0, rng)
        assert var == 0.0
        assert_array_equal(y, x)

    def test_variance_definition(self, rng):
        _, var = add_awgn(np.zeros(4, complex), 20.0, 1.0, rng)
        assert var == pytest.approx(0.01)

    def test_empirical_power(self, rng):
        y, var = add_awgn(np.zeros(1_000_000, complex), 20.0, 1.0, rng)
        assert np.mean(np.abs(y) ** 2) == pytest.approx(0.01, abs=3e-5)
        assert np.var(y.real) == pytest.approx(0.005, rel=0.01)

    def test_bad_power(self, rng):
        with pytest.raises(ValueError):
            add_awgn(np.zeros(4, complex), 10.0, 0.0, rng)
