import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emi_linksim.channel import ChannelConfig, add_awgn, apply_cfo, combine
from emi_linksim.dsp import DbGain, IqBuffer, complex_gaussian, mean_power, seeded_rng, welch_psd
from emi_linksim.interference import cw_tone
from emi_linksim.kpi import sinr

from conftest import FS


def unit_signal(n=100_000, seed=0):
    return IqBuffer(complex_gaussian(seeded_rng(seed, 5), n), FS, 2.2e9)


class TestAwgn:
    def test_disabled(self):
        buf = unit_signal(100)
        for snr in (None, math.inf):
            out, p = add_awgn(buf, snr, 0)
            assert out is buf and p == 0.0

    def test_zero_db(self):
        buf = IqBuffer(np.ones(100_000), FS)
        _, p = add_awgn(buf, 0.0, 1)
        assert p == pytest.approx(1.0, abs=0.02)

    def test_baseline_calibration_point(self):
        buf = IqBuffer(np.ones(100_000), FS)
        _, p = add_awgn(buf, 15.12, 2)
        assert p == pytest.approx(0.0308, rel=0.03)

    def test_noise_is_circular(self):
        buf = IqBuffer(np.zeros(100_000) + 1, FS)
        out, _ = add_awgn(buf, 0.0, 3)
        n = out.samples - 1
        assert np.var(n.real) == pytest.approx(np.var(n.imag), rel=0.05)
        assert abs(np.mean(n.real * n.imag)) < 0.01

    def test_seeded(self):
        buf = unit_signal(1000)
        a, _ = add_awgn(buf, 10, 7)
        b, _ = add_awgn(buf, 10, 7)
        c, _ = add_awgn(buf, 10, 8)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            add_awgn(IqBuffer(np.zeros(0), FS), 10, 0)


class TestCfo:
    def test_zero_identity(self):
        buf = unit_signal(64)
        assert apply_cfo(buf, 0.0) is buf

    def test_keeps_center(self):
        buf = unit_signal(64)
        out = apply_cfo(buf, 1372.998)
        assert out.center_freq_hz == buf.center_freq_hz

    @given(st.floats(-7e6, 7e6))
    def test_power_unchanged(self, cfo):
        buf = unit_signal(512)
        assert mean_power(apply_cfo(buf, cfo)) == pytest.approx(mean_power(buf), rel=1e-12)


class TestCombine:
    def test_clean_passthrough(self):
        buf = unit_signal(1000)
        out, truth = combine(buf, None, ChannelConfig())
        assert np.array_equal(out.samples, buf.samples)
        assert truth.p_interference == 0 and truth.p_noise == 0

    def test_sentinels_reduce_to_gain_and_cfo(self):
        buf = unit_signal(1000)
        g = 0.5 - 0.25j
        jam = unit_signal(1000, seed=1)
        cfg = ChannelConfig(snr_db=math.inf, interferer_gain=-math.inf, flat_gain=g, cfo_hz=500.0)
        out, _ = combine(buf, jam, cfg)
        assert np.array_equal(out.samples, apply_cfo(buf, 500.0).samples * g)

    def test_signal_power_truth(self):
        buf = unit_signal(1000)
        g = 1.5 + 2j
        _, truth = combine(buf, None, ChannelConfig(flat_gain=g, snr_db=10))
        assert truth.p_signal == pytest.approx(mean_power(buf) * abs(g) ** 2, rel=1e-9)

    def test_interferer_offset_in_psd(self):
        desired = unit_signal(65536)
        jam = cw_tone(0.0, 1.0, FS, 65536 / FS)
        cfg = ChannelConfig(interferer_offset_hz=4.5e6, interferer_gain=DbGain(20))
        out, _ = combine(desired, jam, cfg)
        trace = welch_psd(out)
        assert abs(trace.peak_freq_hz() - 4.5e6) <= trace.resolution_hz

    def test_interferer_cyclically_extended(self):
        desired = IqBuffer(np.zeros(10), FS)
        jam = IqBuffer(np.arange(1, 4), FS)
        out, _ = combine(desired, jam, ChannelConfig(interferer_gain=DbGain(0)))
        np.testing.assert_array_equal(out.samples.real, [1, 2, 3, 1, 2, 3, 1, 2, 3, 1])

    def test_interferer_trimmed(self):
        desired = IqBuffer(np.zeros(4), FS)
        jam = IqBuffer(np.arange(1, 9), FS)
        out, _ = combine(desired, jam, ChannelConfig(interferer_gain=DbGain(0)))
        np.testing.assert_array_equal(out.samples.real, [1, 2, 3, 4])

    def test_rate_mismatch(self):
        with pytest.raises(ValueError, match="sample-rate"):
            combine(unit_signal(10), IqBuffer(np.ones(10), FS / 2), ChannelConfig(interferer_gain=DbGain(0)))

    def test_doubling_interferer_quadruples_power(self):
        desired = unit_signal(50_000)
        jam = unit_signal(50_000, seed=3)
        cfg = ChannelConfig(interferer_gain=DbGain(3), snr_db=20)
        _, t1 = combine(desired, jam, cfg)
        _, t2 = combine(desired, jam.replace(jam.samples * 2), cfg)
        assert t2.p_interference / t1.p_interference == pytest.approx(4.0, rel=0.01)

    def test_truth_sinr_decreases_with_gain(self):
        desired = unit_signal(20_000)
        jam = unit_signal(20_000, seed=3)
        values = []
        for g in (0, 3, 6, 12, 15, 18):
            _, truth = combine(desired, jam, ChannelConfig(snr_db=20, interferer_gain=DbGain(g), seed=4))
            values.append(sinr(truth)[1])
        assert np.all(np.diff(values) < 0)

    def test_offset_validated(self):
        with pytest.raises(ValueError):
            combine(unit_signal(10), unit_signal(10), ChannelConfig(interferer_offset_hz=FS, interferer_gain=DbGain(0)))

    def test_zero_flat_gain_rejected(self):
        with pytest.raises(ValueError):
            ChannelConfig(flat_gain=0)
