import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from emi_linksim.dsp import IqBuffer, complex_gaussian, random_bits, seeded_rng
from emi_linksim.interference import TransientPulseParams, transient_pulse
from emi_linksim.kpi import (
    KpiReport,
    NoiselessError,
    PowerTriple,
    SubcarrierSinrInput,
    ber,
    config_digest,
    estimate_sinr_from_grid,
    evm,
    evm_grid,
    evm_grid_csv,
    papr,
    sinr,
    sinr_db_or_sentinel,
    sinr_per_subcarrier,
)
from emi_linksim.ofdm import PRESETS, build_grid, equalize, estimate_channel, ofdm_demodulate, ofdm_modulate

NR = PRESETS["nr-like"]


def direct_evm(ref, rx):
    """Plain-Python summation of the EVM definition."""
    n = len(ref)
    num = sum(abs(r - x) ** 2 for r, x in zip(ref, rx)) / n
    den = sum(abs(r) ** 2 for r in ref) / n
    rms = math.sqrt(num) / math.sqrt(den) * 100
    peak = max(abs(r - x) for r, x in zip(ref, rx)) / math.sqrt(den) * 100
    return rms, peak


def nr_grid(seed=0, cfg=NR):
    return build_grid(random_bits(seeded_rng(seed), cfg.payload_bits()), cfg, seed)


class TestEvm:
    def test_identity(self):
        ref = complex_gaussian(seeded_rng(0), 50)
        rms, peak, per = evm(ref, ref)
        assert rms == 0 and peak == 0 and not per.any()

    def test_hand_example(self):
        rms, peak, _ = evm([1, 1j], [1, 0])
        assert rms == pytest.approx(70.7107, abs=1e-4)
        assert peak == pytest.approx(100.0)

    def test_noise_power_0025(self):
        rng = seeded_rng(1)
        ref = np.exp(2j * np.pi * rng.random(10_000))
        rx = ref + complex_gaussian(rng, 10_000) * 0.05
        assert evm(ref, rx)[0] == pytest.approx(5.0, abs=0.2)

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            n = int(rng.integers(1, 1001))
            ref = rng.normal(size=n) + 1j * rng.normal(size=n)
            rx = ref + rng.normal(scale=rng.uniform(0.01, 3), size=n) + 1j * rng.normal(size=n)
            rms, peak, _ = evm(ref, rx)
            d_rms, d_peak = direct_evm(ref.tolist(), rx.tolist())
            assert rms == pytest.approx(d_rms, rel=1e-12)
            assert peak == pytest.approx(d_peak, rel=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError, match="length"):
            evm([1, 2], [1])
        with pytest.raises(ValueError, match="zero power"):
            evm([0, 0], [1, 1])

    @given(st.integers(1, 200).flatmap(lambda n: st.tuples(arrays(np.float64, (4, n), elements=st.floats(-10, 10)))))
    def test_peak_at_least_rms(self, packed):
        a = packed[0]
        ref, rx = a[0] + 1j * a[1], a[2] + 1j * a[3]
        if np.mean(np.abs(ref) ** 2) == 0:  # zero or underflowing reference power
            return
        rms, peak, per = evm(ref, rx)
        assert peak >= rms - 1e-9 * max(rms, 1)
        if np.allclose(per, per[0], rtol=1e-12, atol=0):
            assert peak == pytest.approx(rms, rel=1e-9)

    def test_peak_equals_rms_only_for_equal_errors(self):
        ref = np.ones(4)
        assert evm(ref, ref + 0.1)[1] == pytest.approx(evm(ref, ref + 0.1)[0], rel=1e-12)
        rms, peak, _ = evm(ref, ref + np.array([0.1, 0.1, 0.1, 0.2]))
        assert peak > rms


class TestSinr:
    def test_unit(self):
        assert sinr(PowerTriple(1, 0, 1)) == (1.0, 0.0)

    def test_three_db(self):
        ratio, db = sinr(PowerTriple(10, 4, 1))
        assert ratio == 2.0
        assert db == pytest.approx(10 * math.log10(2), abs=1e-9)
        assert round(db, 4) == 3.0103

    def test_back_solved_table_value(self):
        assert round(sinr(PowerTriple(0.948, 1.0, 0.0))[1], 2) == -0.23

    def test_noiseless(self):
        with pytest.raises(NoiselessError):
            sinr(PowerTriple(1, 0, 0))
        assert sinr_db_or_sentinel(PowerTriple(1, 0, 0)) == 300.0

    def test_invalid_triple(self):
        with pytest.raises(ValueError):
            PowerTriple(-1, 0, 0)
        with pytest.raises(ValueError):
            PowerTriple(1, math.nan, 0)

    @given(
        st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.floats(0, 1e6), st.floats(1e-6, 1e6)
    )
    def test_scale_invariant(self, s, i, n, c):
        p = PowerTriple(s, i, n)
        assert sinr(p.scaled(c))[0] == pytest.approx(sinr(p)[0], rel=1e-12)


class TestSubcarrierSinr:
    def test_noise_only(self):
        assert sinr_per_subcarrier(SubcarrierSinrInput(1.0, 1.0, (), 0.1, 1.0)) == pytest.approx(10.0, abs=1e-9)

    def test_substitution(self):
        value = sinr_per_subcarrier(SubcarrierSinrInput(1.0, 2.0, (0.25, 0.25), 0.0, 1.0))
        assert value == pytest.approx(2.0, abs=1e-9)

    def test_conventional_form(self):
        value = sinr_per_subcarrier(SubcarrierSinrInput(1.0, 2.0, (0.25, 0.25), 0.0, 1.0), eq4_strict=False)
        assert value == pytest.approx(4.0, abs=1e-9)

    def test_zero_denominator(self):
        with pytest.raises(NoiselessError):
            sinr_per_subcarrier(SubcarrierSinrInput(1.0, 1.0))

    def test_invalid(self):
        with pytest.raises(ValueError):
            SubcarrierSinrInput(1.0, 0.0)

    def test_agrees_with_aggregate_under_flat_interference(self):
        rng = seeded_rng(3)
        h = complex_gaussian(rng, 288)
        p_tx, i_pow, n0, b = 1.0, (0.05, 0.02), 1e-6, 30e3
        per_k = sinr_per_subcarrier(SubcarrierSinrInput(h, p_tx, i_pow, n0, b))
        weights = np.full(288, p_tx)
        weighted = np.sum(weights * per_k) / np.sum(weights)
        aggregate = PowerTriple(
            float(np.mean(np.abs(h) ** 2) * p_tx), sum(i_pow) * p_tx, n0 * b
        )
        assert 10 * np.log10(weighted) == pytest.approx(sinr(aggregate)[1], abs=0.5)


class TestGridSinrEstimate:
    cfg = NR.with_(num_symbols_per_frame=40)

    def test_noiseless(self):
        g = nr_grid(0, self.cfg)
        est = estimate_sinr_from_grid(g, g)
        assert est.p_interference == 0
        assert sinr_db_or_sentinel(est) == 300.0

    def test_noise_01(self):
        g = nr_grid(0, self.cfg)
        noise = complex_gaussian(seeded_rng(4), g.symbols.size).reshape(g.symbols.shape) * np.sqrt(0.1)
        est = estimate_sinr_from_grid(g.with_symbols(g.symbols + noise), g)
        assert sinr(est)[1] == pytest.approx(10.0, abs=0.5)

    def test_gain_and_phase_do_not_count_as_impairment(self):
        g = nr_grid(0, self.cfg)
        est = estimate_sinr_from_grid(g.with_symbols(g.symbols * (0.5 + 0.5j)), g)
        assert est.p_interference == pytest.approx(0.0, abs=1e-20)
        cell_power = np.mean(np.abs(g.symbols[g.data_mask]) ** 2)
        assert est.p_signal == pytest.approx(0.5 * cell_power, rel=1e-12)


class TestBer:
    def test_identical(self):
        assert ber([0, 1, 1], [0, 1, 1]) == 0.0

    def test_one_flip(self):
        assert ber([0] * 8, [1] + [0] * 7) == 0.125

    def test_independent(self):
        a = random_bits(seeded_rng(1), 100_000)
        b = random_bits(seeded_rng(2), 100_000)
        assert ber(a, b) == pytest.approx(0.5, abs=0.01)

    def test_errors(self):
        with pytest.raises(ValueError):
            ber([0, 1], [0])
        with pytest.raises(ValueError):
            ber([], [])

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=300), st.randoms())
    def test_symmetric_and_permutation_invariant(self, pairs, rnd):
        a = [p[0] for p in pairs]
        b = [p[1] for p in pairs]
        assert ber(a, b) == ber(b, a)
        order = list(range(len(a)))
        rnd.shuffle(order)
        assert ber([a[i] for i in order], [b[i] for i in order]) == ber(a, b)


class TestPapr:
    def test_constant_modulus(self):
        assert papr(np.exp(1j * np.linspace(0, 7, 100))) == pytest.approx(0.0, abs=1e-12)

    def test_impulse(self):
        assert papr(np.array([1, 0, 0, 0])) == pytest.approx(6.0206, abs=1e-4)

    def test_ofdm_frames(self):
        values = [papr(ofdm_modulate(nr_grid(s))) for s in range(100)]
        assert 8 <= min(values) and max(values) <= 13

    def test_errors(self):
        with pytest.raises(ValueError):
            papr(np.zeros(4))
        with pytest.raises(ValueError):
            papr(np.zeros(0))


class TestEvmGrid:
    def test_clean(self):
        g = nr_grid(1)
        raw = ofdm_demodulate(ofdm_modulate(g), NR, 0)
        eq = equalize(raw, estimate_channel(raw, g))
        assert np.nanmax(evm_grid(eq, g)) < 0.1

    def test_single_cell(self):
        g = nr_grid(1)
        s = g.symbols.copy()
        s[40, 77] += 0.3
        grid = evm_grid(g.with_symbols(s), g)
        hot = np.argwhere(grid > 1e-9)
        assert hot.tolist() == [[40, 77]]

    def test_burst_lands_on_hit_symbol(self):
        g = nr_grid(2)
        x = ofdm_modulate(g).samples.copy()
        hit = 101
        pulse = transient_pulse(TransientPulseParams(time_scale=10, a0=3.0), NR.sample_rate_hz, 30e-6).samples
        at = hit * NR.symbol_len + NR.cp_len + 100
        x[at : at + 200] += pulse[:200]
        raw = ofdm_demodulate(IqBuffer(x, NR.sample_rate_hz), NR, 0)
        grid = evm_grid(equalize(raw, estimate_channel(raw, g)), g)
        per_symbol = np.nanmean(grid, axis=0)
        elevated = np.flatnonzero(per_symbol > 10 * np.median(per_symbol) + 1e-6)
        assert elevated.tolist() == [hit]

    def test_shape_mismatch(self):
        other = PRESETS["lte-a-like"]
        a = nr_grid(0)
        b = build_grid(random_bits(seeded_rng(0), other.payload_bits()), other, 0)
        with pytest.raises(ValueError, match="shape"):
            evm_grid(a, b)

    def test_csv(self):
        g = nr_grid(0)
        text = evm_grid_csv(evm_grid(g, g), g.roles)
        lines = text.splitlines()
        assert lines[0] == "subcarrier,symbol,evm_percent,role"
        assert len(lines) == 1 + g.symbols.size
        assert lines[1] == "0,0,0,pilot"


class TestReport:
    def report(self):
        grid = np.array([[1.0, np.nan], [2.5, 3.0]])
        return KpiReport(12.5, 80.0, 0.01, 7.5, 1372.9, 10.2, np.array([1.0, 2.0]), grid, False)

    def test_json_keys(self):
        d = json.loads(self.report().to_json("abc"))
        assert set(d) == {
            "evm_rms_percent",
            "evm_peak_percent",
            "ber",
            "sinr_db",
            "cfo_hz",
            "papr_db",
            "sinr_per_subcarrier_db",
            "evm_grid",
            "sync_failed",
            "config_digest",
        }
        assert d["evm_grid"][0][1] is None

    def test_round_trip(self):
        r = self.report()
        back = KpiReport.from_dict(json.loads(r.to_json("x")))
        assert back.evm_rms_percent == r.evm_rms_percent
        np.testing.assert_array_equal(back.evm_grid, r.evm_grid)
        np.testing.assert_array_equal(back.sinr_per_subcarrier_db, r.sinr_per_subcarrier_db)

    def test_invariants(self):
        with pytest.raises(ValueError):
            KpiReport(10, 5, 0.1, 0, 0, 0)
        with pytest.raises(ValueError):
            KpiReport(1, 5, 1.5, 0, 0, 0)

    def test_digest_stable(self):
        assert config_digest({"a": 1, "b": [1, 2]}) == config_digest({"b": [1, 2], "a": 1})
        assert config_digest({"a": 1}) != config_digest({"a": 2})
