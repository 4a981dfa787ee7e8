import csv

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ser_dsp.channel import ChannelConfig, add_ase
from ser_dsp.frontend import FrontEndConfig, detect, set_lospr
from ser_dsp.reconstruct import dfr
from ser_dsp.rxdsp import (
    REPORT_COLUMNS,
    MetricReport,
    count_bit_errors,
    effective_snr,
    empirical_dser,
    hard_decisions,
    in_band_sir,
    q_func,
    raw_sir,
    rx_chain,
    theoretical_dfr_mse,
    theoretical_dfr_snr,
    theoretical_dser,
    theoretical_eser,
    write_reports,
)
from ser_dsp.waveform import constellation, gen_qam_symbols, rrc_shape

from conftest import gaussian_field


class TestQFunc:
    def test_values(self):
        assert q_func(0) == 0.5
        assert q_func(2.512) == pytest.approx(6.0e-3, abs=1e-4)

    @given(st.floats(-8, 8))
    def test_symmetry(self, x):
        assert q_func(-x) == pytest.approx(1 - q_func(x), abs=1e-15)

    def test_accuracy(self):
        mpmath.mp.dps = 50
        for x in np.linspace(0, 8, 81):
            ref = float(mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)) / 2)
            assert abs(q_func(x) - ref) / ref < 1e-12

    def test_vectorized(self):
        assert q_func(np.array([0.0, 0.0])).tolist() == [0.5, 0.5]


class TestTheory:
    def test_dser(self):
        assert theoretical_dser(8) == pytest.approx(6e-3, rel=0.05)
        assert theoretical_dser(np.inf) == 0

    def test_dser_monte_carlo(self):
        w = gaussian_field(2**20, 1.0, seed=12)
        a = 10 ** (8 / 20)
        assert empirical_dser(w.samples, a) == pytest.approx(theoretical_dser(8), rel=0.1)

    @given(st.floats(-5, 30))
    def test_eser_twice_dser(self, x):
        assert theoretical_eser(x) == 2 * theoretical_dser(x)

    def test_eser_value(self):
        assert theoretical_eser(8) == pytest.approx(1.2e-2, rel=0.02)

    def test_dfr_limits(self):
        assert theoretical_dfr_mse(np.inf) == 0
        assert theoretical_dfr_snr(np.inf) == np.inf
        assert theoretical_dfr_snr(8) == pytest.approx(26, abs=0.5)

    def test_dfr_mse_monte_carlo(self):
        rng = np.random.default_rng(13)
        lospr = 8
        z = rng.standard_normal(4 * 10**6)  # I + Q for unit E{I^2+Q^2}
        a = 10 ** (lospr / 20)
        t = z + a
        mse = np.mean(2 * t**2 * (t < 0))
        assert mse == pytest.approx(theoretical_dfr_mse(lospr), rel=0.05)

    def test_dfr_mse_decreasing(self):
        v = theoretical_dfr_mse(np.linspace(0, 20, 41))
        assert np.all(np.diff(v) < 0)

    def test_sir(self):
        assert float(in_band_sir(12)) == pytest.approx(16.26, abs=0.005)
        assert float(raw_sir(0)) == pytest.approx(3.0103, abs=1e-4)


class TestEffectiveSnr:
    def test_perfect(self):
        x = constellation("QAM16")
        assert effective_snr(x, x)[0] == np.inf

    @given(st.floats(0, 2 * np.pi), st.floats(0.1, 10))
    @settings(max_examples=30, deadline=None)
    def test_rotation_invariant(self, phi, gain):
        rng = np.random.default_rng(0)
        x = constellation("QAM16")[rng.integers(0, 16, 512)]
        y = x + 0.1 * (rng.standard_normal(512) + 1j * rng.standard_normal(512))
        a = effective_snr(y, x)[0]
        b = effective_snr(gain * np.exp(1j * phi) * y, x)[0]
        assert b == pytest.approx(a, abs=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            effective_snr(np.ones(3), np.ones(4))

    def test_known_noise(self):
        rng = np.random.default_rng(1)
        x = constellation("QAM64")[rng.integers(0, 64, 2**18)]
        n = np.sqrt(0.01 / 2) * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))
        assert effective_snr(x + n, x)[0] == pytest.approx(20.0, abs=0.05)


class TestDecisions:
    @pytest.mark.parametrize("fmt", ["QAM4", "QAM16", "QAM32", "QAM64"])
    def test_points_map_to_themselves(self, fmt):
        pts = constellation(fmt)
        assert np.array_equal(hard_decisions(pts, fmt), np.arange(len(pts)))

    def test_bit_errors(self):
        assert count_bit_errors([0b101010], [0b010101]) == 6
        assert count_bit_errors([3, 3], [3, 3]) == 0

    @pytest.mark.parametrize("n", [10**3, 10**4, 10**5])
    def test_planted_rate_unbiased(self, n):
        rng = np.random.default_rng(n)
        p = 0.03
        flips = rng.random((n, 6)) < p
        b = (flips * (1 << np.arange(6))).sum(axis=1)
        est = count_bit_errors(np.zeros(n, int), b) / (6 * n)
        assert abs(est - p) < 4 * np.sqrt(p * (1 - p) / (6 * n))


class TestRxChain:
    def test_ideal_linear(self):
        s = gen_qam_symbols("QAM64", 2**14, 0)
        w = rrc_shape(s, 2, 0.01, 256)
        rep = rx_chain(w.samples.real, w.samples.imag, None, s)
        assert rep.effective_snr_db >= 50 and rep.ber == 0 and rep.symbol_error_rate == 0

    def test_awgn_qpsk_ber(self):
        s = gen_qam_symbols("QAM4", 2**18, 1)
        w = rrc_shape(s, 2, 0.01, 256)
        esn0 = 9.8
        osnr = esn0 - 10 * np.log10(12.5e9 / 100e9)
        w = add_ase(w, osnr, 12.5e9, seed=2)
        rep = rx_chain(w.samples.real, w.samples.imag, None, s)
        assert rep.effective_snr_db == pytest.approx(esn0, abs=0.1)
        assert rep.ber == pytest.approx(q_func(np.sqrt(10 ** (esn0 / 10))), rel=0.1)

    def test_dfr_over_cd(self, qam64_cd):
        syms, w = qam64_cd
        cfg = set_lospr(w, 10, FrontEndConfig(bwr=2.0))
        r = dfr(detect(w, cfg), cfg.a1)
        rep = rx_chain(r.i_hat, r.q_hat, ChannelConfig(160), syms)
        assert rep.effective_snr_db >= 35

    def test_length_mismatch(self):
        s = gen_qam_symbols("QAM4", 64, 0)
        with pytest.raises(ValueError):
            rx_chain(np.zeros(100), np.zeros(100), None, s)

    def test_non_finite(self):
        s = gen_qam_symbols("QAM4", 64, 0)
        with pytest.raises(ValueError):
            rx_chain(np.full(128, np.nan), np.zeros(128), None, s)


class TestReports:
    def test_ranges(self):
        with pytest.raises(ValueError):
            MetricReport(10.0, 1.5, 0.0)

    def test_csv(self, tmp_path):
        r = MetricReport(
            21.123456789012345, 1e-3, 2e-3, 0.006, 8.0, "DFR",
            dict(experiment="x", grid_index=0, seed=1, sweep_variable="lospr_db", sweep_value=8.0,
                 format="QAM64", bwr=None, osnr_db=None, n_iter=None, clip_db=None, mu=None),
        )
        write_reports(tmp_path / "r.csv", [r])
        rows = list(csv.reader(open(tmp_path / "r.csv")))
        assert tuple(rows[0]) == REPORT_COLUMNS
        row = dict(zip(rows[0], rows[1]))
        assert row["effective_snr_db"] == "21.123456789"
        assert row["method"] == "DFR" and row["bwr"] == "" and row["lospr_db"] == "8"
