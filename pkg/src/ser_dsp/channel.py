"""Linear fiber channel: chromatic dispersion and ASE noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .waveform import Waveform

__all__ = ["ChannelConfig", "apply_cd", "compensate_cd", "add_ase", "cd_phase"]

C_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ChannelConfig:
    """
    Fiber link parameters.

    Defaults describe C-band SSMF (D = 17 ps/nm/km at 1550 nm) and the usual
    0.1 nm (12.5 GHz) OSNR reference bandwidth. ``osnr_db=None`` means no ASE.
    """

    length_km: float = 0.0
    dispersion: float = 17.0
    wavelength: float = 1550.0
    osnr_db: float | None = None
    osnr_ref_bw: float = 12.5e9

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError("length_km must be >= 0")
        if not np.isfinite(self.dispersion):
            raise ValueError("dispersion must be finite")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")


def cd_phase(n: int, sample_rate: float, cfg: ChannelConfig) -> np.ndarray:
    """Frequency-domain CD phase pi*D*L*lambda^2*f^2/c on an FFT grid of size n."""
    f = np.fft.fftfreq(n, d=1.0 / sample_rate)
    d_si = cfg.dispersion * 1e-6  # ps/(nm km) -> s/m^2
    lam = cfg.wavelength * 1e-9
    return np.pi * d_si * (cfg.length_km * 1e3) * lam**2 * f**2 / C_LIGHT


def apply_cd(w: Waveform, cfg: ChannelConfig) -> Waveform:
    """All-pass dispersion over the whole trace; a negative length undoes it."""
    if cfg.length_km == 0:
        return w
    x = np.asarray(w.samples, dtype=complex)
    phi = cd_phase(len(x), w.sample_rate, cfg)
    return w.replace(np.fft.ifft(np.fft.fft(x) * np.exp(1j * phi)))


def _inverse(cfg: ChannelConfig) -> ChannelConfig:
    # length_km >= 0 is enforced, so the inverse flips the dispersion sign.
    return ChannelConfig(cfg.length_km, -cfg.dispersion, cfg.wavelength)


def compensate_cd(w: Waveform, cfg: ChannelConfig) -> Waveform:
    """Exact inverse of :func:`apply_cd`."""
    return apply_cd(w, _inverse(cfg))


def add_ase(w: Waveform, osnr_db, ref_bw: float = 12.5e9, seed: int = 0) -> Waveform:
    """
    Add circular white Gaussian noise at a given OSNR.

    The noise density is chosen so that signal power over the noise power
    falling in `ref_bw` equals ``10**(osnr_db/10)``; the total noise variance
    over the simulated band is therefore scaled by ``sample_rate / ref_bw``.
    ``osnr_db`` of ``None`` or ``inf`` returns `w` unchanged.
    """
    if ref_bw <= 0:
        raise ValueError("ref_bw must be positive")
    if osnr_db is None or (np.isinf(osnr_db) and osnr_db > 0):
        return w
    if not np.isfinite(osnr_db):
        raise ValueError("osnr_db must be finite")
    ps = w.power()
    if ps <= 0:
        raise ValueError("waveform has zero power")
    var = ps / 10 ** (osnr_db / 10) * w.sample_rate / ref_bw
    rng = np.random.default_rng(seed)
    n = len(w.samples)
    noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return w.replace(np.asarray(w.samples) + np.sqrt(var / 2) * noise)
