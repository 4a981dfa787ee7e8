import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ser_dsp.channel import ChannelConfig, add_ase, apply_cd, compensate_cd
from ser_dsp.rxdsp import rx_chain
from ser_dsp.waveform import Waveform, gen_qam_symbols, rrc_shape

from conftest import cd_field


@pytest.fixture(scope="module")
def wave():
    return rrc_shape(gen_qam_symbols("QAM16", 4096, 0), 2, 0.01, 256)


class TestConfig:
    def test_defaults(self):
        c = ChannelConfig()
        assert (c.dispersion, c.wavelength, c.osnr_ref_bw) == (17.0, 1550.0, 12.5e9)

    @pytest.mark.parametrize("kw", [{"length_km": -1}, {"wavelength": 0}, {"dispersion": np.inf}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ChannelConfig(**kw)


class TestCd:
    def test_zero_length_identity(self, wave):
        assert np.array_equal(apply_cd(wave, ChannelConfig(0)).samples, wave.samples)

    def test_additive(self, wave):
        twice = apply_cd(apply_cd(wave, ChannelConfig(80)), ChannelConfig(80)).samples
        once = apply_cd(wave, ChannelConfig(160)).samples
        assert np.max(np.abs(twice - once)) / np.max(np.abs(once)) < 1e-10

    @given(st.floats(0, 2000), st.floats(-20, 20))
    @settings(max_examples=20, deadline=None)
    def test_unitary_and_invertible(self, length, disp):
        x = rrc_shape(gen_qam_symbols("QAM4", 512, 1), 2, 0.1, 16)
        cfg = ChannelConfig(length, disp)
        y = apply_cd(x, cfg)
        p_in = np.sum(np.abs(x.samples) ** 2)
        assert abs(np.sum(np.abs(y.samples) ** 2) - p_in) / p_in < 1e-12
        back = compensate_cd(y, cfg).samples
        assert np.max(np.abs(back - x.samples)) / np.max(np.abs(x.samples)) < 1e-10

    def test_gaussianizes(self):
        _, w = cd_field("QAM64", 2**19, seed=4)
        x = w.samples
        assert len(x) >= 10**6
        for part in (x.real, x.imag):
            assert abs(stats.kurtosis(part)) < 0.1


class TestAse:
    def test_passthrough(self, wave):
        assert add_ase(wave, None) is wave
        assert add_ase(wave, np.inf) is wave

    def test_bad_ref_bw(self, wave):
        with pytest.raises(ValueError):
            add_ase(wave, 20, ref_bw=0)

    def test_noise_power_in_ref_bw(self):
        n = 2**20
        w = Waveform(np.ones(n, complex), 200e9, 100e9)
        noise = add_ase(w, 15, 12.5e9, seed=3).samples - 1
        # white noise: power in ref_bw is total * ref_bw / fs
        measured = np.mean(np.abs(noise) ** 2) * 12.5e9 / 200e9
        target = 1 / 10**1.5
        assert measured == pytest.approx(target, rel=0.01)

    def test_deterministic(self, wave):
        a = add_ase(wave, 20, seed=9).samples
        b = add_ase(wave, 20, seed=9).samples
        c = add_ase(wave, 20, seed=10).samples
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_uncorrelated_with_signal(self):
        syms = gen_qam_symbols("QAM16", 2**18, 2)
        w = rrc_shape(syms, 2, 0.01, 256)
        noise = add_ase(w, 18, seed=5).samples - w.samples
        x = w.samples
        rho = abs(np.vdot(x, noise)) / np.sqrt(np.vdot(x, x).real * np.vdot(noise, noise).real)
        assert rho < 3 / np.sqrt(len(x))

    def test_linear_chain_snr(self):
        # matched filtering keeps noise in one symbol-rate bandwidth
        syms = gen_qam_symbols("QAM16", 2**17, 6)
        w = add_ase(rrc_shape(syms, 2, 0.01, 256), 20, 12.5e9, seed=1)
        rep = rx_chain(w.samples.real, w.samples.imag, None, syms)
        assert rep.effective_snr_db == pytest.approx(20 + 10 * np.log10(12.5e9 / 100e9), abs=0.2)
