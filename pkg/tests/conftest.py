import numpy as np
import pytest

from ser_dsp.channel import ChannelConfig, apply_cd
from ser_dsp.waveform import Waveform, gen_qam_symbols, rrc_shape


def gaussian_field(n, power=1.0, seed=0, symbol_rate=1.0, sps=2):
    """Circular complex Gaussian samples with E|x|^2 = power."""
    rng = np.random.default_rng(seed)
    x = np.sqrt(power / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return Waveform(x, symbol_rate * sps, symbol_rate)


def cd_field(fmt="QAM64", n=2**15, seed=1, length_km=160.0, sps=2):
    syms = gen_qam_symbols(fmt, n, seed)
    w = rrc_shape(syms, sps, 0.01, 256)
    return syms, apply_cd(w, ChannelConfig(length_km))


@pytest.fixture(scope="session")
def qam64_cd():
    return cd_field()
