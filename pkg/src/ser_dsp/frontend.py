"""
Single-ended coherent receiver front end.

Photocurrents are produced in the rescaled convention of an imbalanced
hybrid: each branch has been divided by its own power-split factor so the
signal-signal beat term ``I**2 + Q**2`` carries the same unit gain in both
traces, and only the effective LO amplitudes ``a1``, ``a2`` differ::

    r1 = j1 * (a1**2 + I**2 + Q**2 + 2*a1*I)
    r2 = j2 * (a2**2 + I**2 + Q**2 + 2*a2*Q)

where ``*`` is circular convolution with the O/E impulse response.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .waveform import Waveform, circular_filter

__all__ = [
    "FrontEndConfig",
    "PhotocurrentPair",
    "detect",
    "detect_dual",
    "apply_bwr",
    "brickwall",
    "lospr_of",
    "set_lospr",
    "estimate_lo_amplitude",
    "supergaussian_response",
    "supergaussian_taps",
    "decimate",
    "ssbi_inband_fraction",
]


@dataclass(frozen=True, eq=False)
class FrontEndConfig:
    """
    Receiver model.

    `j1`/`j2` of ``None`` mean an ideal (single unit tap) response and
    `bwr` of ``None`` means unlimited electrical bandwidth.
    """

    a1: float = 1.0
    a2: float = 1.0
    j1: np.ndarray | None = None
    j2: np.ndarray | None = None
    bwr: float | None = None

    def __post_init__(self):
        if not (self.a1 > 0 and self.a2 > 0):
            raise ValueError("LO amplitudes must be positive")
        for name in ("j1", "j2"):
            taps = getattr(self, name)
            if taps is not None:
                taps = np.asarray(taps, dtype=float)
                if taps.ndim != 1 or taps.size == 0 or not np.all(np.isfinite(taps)):
                    raise ValueError(f"{name} must be a finite, non-empty tap vector")
                object.__setattr__(self, name, taps)
        if self.bwr is not None and not self.bwr > 0:
            raise ValueError("bwr must be positive")

    @property
    def a_mean_sq(self) -> float:
        return (self.a1**2 + self.a2**2) / 2

    def with_amplitudes(self, a1: float, a2: float) -> "FrontEndConfig":
        return replace(self, a1=a1, a2=a2)


@dataclass(frozen=True, eq=False)
class PhotocurrentPair:
    r1: np.ndarray
    r2: np.ndarray
    sample_rate: float
    config_used: FrontEndConfig
    symbol_rate: float | None = None

    def __post_init__(self):
        if np.shape(self.r1) != np.shape(self.r2):
            raise ValueError("r1 and r2 must have equal lengths")

    def __len__(self) -> int:
        return len(self.r1)


def detect(field: Waveform, cfg: FrontEndConfig) -> PhotocurrentPair:
    """Square-law detection of `field` by the two single-ended branches."""
    x = np.asarray(field.samples, dtype=complex)
    if x.size == 0:
        raise ValueError("empty field")
    i, q = x.real, x.imag
    ssbi = i * i + q * q
    r1 = cfg.a1**2 + ssbi + 2 * cfg.a1 * i
    r2 = cfg.a2**2 + ssbi + 2 * cfg.a2 * q
    if cfg.j1 is not None:
        r1 = circular_filter(r1, cfg.j1)
    if cfg.j2 is not None:
        r2 = circular_filter(r2, cfg.j2)
    pair = PhotocurrentPair(r1, r2, field.sample_rate, cfg, field.symbol_rate)
    if cfg.bwr is not None:
        pair = apply_bwr(pair, cfg.bwr, field.symbol_rate)
    return pair


def detect_dual(fields, cfg_x: FrontEndConfig, cfg_y: FrontEndConfig | None = None):
    """Dual-polarization receiver: two independent single-polarization detections."""
    fx, fy = fields
    return detect(fx, cfg_x), detect(fy, cfg_y if cfg_y is not None else cfg_x)


def brickwall(x: np.ndarray, cutoff: float, sample_rate: float) -> np.ndarray:
    """Ideal low-pass over the full trace; bins with |f| <= cutoff are kept."""
    f = np.fft.fftfreq(x.shape[-1], d=1.0 / sample_rate)
    keep = np.abs(f) <= cutoff * (1 + 1e-12)
    y = np.fft.ifft(np.fft.fft(x) * keep)
    return y.real if np.isrealobj(x) else y


def apply_bwr(pair: PhotocurrentPair, bwr: float, symbol_rate: float) -> PhotocurrentPair:
    """Limit both traces to a one-sided bandwidth of ``bwr/2 * symbol_rate``."""
    if not bwr > 0:
        raise ValueError("bwr must be positive")
    if pair.sample_rate < bwr * symbol_rate * (1 - 1e-12):
        raise ValueError(
            f"sample rate {pair.sample_rate:g} cannot represent a cutoff of "
            f"{bwr / 2 * symbol_rate:g} Hz"
        )
    cutoff = bwr / 2 * symbol_rate
    return PhotocurrentPair(
        brickwall(pair.r1, cutoff, pair.sample_rate),
        brickwall(pair.r2, cutoff, pair.sample_rate),
        pair.sample_rate,
        pair.config_used,
        symbol_rate,
    )


def lospr_of(field: Waveform, cfg: FrontEndConfig) -> float:
    """LO-to-signal power ratio ``mean(a1^2, a2^2) / E{I^2+Q^2}`` in dB."""
    p = field.power()
    if p <= 0:
        raise ValueError("zero-power field")
    return float(10 * np.log10(cfg.a_mean_sq / p))


def set_lospr(field: Waveform, target_db: float, cfg: FrontEndConfig) -> FrontEndConfig:
    """Rescale both LO amplitudes, keeping their ratio, to reach `target_db`."""
    if not np.isfinite(target_db):
        raise ValueError("target LOSPR must be finite")
    k = np.sqrt(10 ** (target_db / 10) * field.power() / cfg.a_mean_sq)
    return cfg.with_amplitudes(cfg.a1 * k, cfg.a2 * k)


def estimate_lo_amplitude(r: np.ndarray) -> float:
    """
    Blind LO amplitude estimate from one photocurrent trace.

    For a Gaussian field ``mean(r) = A^2 + P`` and ``var(r) = 2 A^2 P + P^2``,
    so the mean minus the signal power gives ``A^2 = sqrt(mean^2 - var)``.
    Assumes an ideal (unit DC gain) O/E response.
    """
    r = np.asarray(r, dtype=float)
    m = np.mean(r)
    v = np.var(r)
    disc = m * m - v
    if disc <= 0:
        raise ValueError("trace statistics are inconsistent with LO-dominated detection")
    return float(disc**0.25)


def supergaussian_response(f: np.ndarray, f3db: float, order: int = 2) -> np.ndarray:
    """Zero-phase super-Gaussian magnitude, -3 dB (power) at `f3db`."""
    return np.exp(-0.5 * np.log(2) * (np.abs(f) / f3db) ** (2 * order))


def supergaussian_taps(
    f3db: float, sample_rate: float, order: int = 2, n_taps: int = 33, n_fft: int = 4096
) -> np.ndarray:
    """Centred, odd-length FIR of a super-Gaussian response, unit DC gain."""
    if n_taps % 2 == 0:
        raise ValueError("n_taps must be odd")
    f = np.fft.fftfreq(n_fft, d=1.0 / sample_rate)
    h = np.fft.ifft(supergaussian_response(f, f3db, order)).real
    h = np.fft.fftshift(h)
    c = n_fft // 2
    taps = h[c - n_taps // 2 : c + n_taps // 2 + 1]
    return taps / np.sum(taps)


def decimate(pair: PhotocurrentPair, factor: int, phase: int = 0) -> PhotocurrentPair:
    """Keep every `factor`-th sample (ADC sampling after the analog chain)."""
    return PhotocurrentPair(
        np.asarray(pair.r1)[phase::factor],
        np.asarray(pair.r2)[phase::factor],
        pair.sample_rate / factor,
        pair.config_used,
        pair.symbol_rate,
    )


def ssbi_inband_fraction(field, bandwidth: float) -> float:
    """
    Share of the SSBI power (``I^2 + Q^2`` less its mean) inside ``|f| <= bandwidth/2``.

    `bandwidth` is the two-sided width of the signal spectrum.
    """
    x = np.asarray(getattr(field, "samples", field))
    fs = field.sample_rate
    p = np.abs(x) ** 2
    spec = np.abs(np.fft.fft(p - p.mean())) ** 2
    f = np.fft.fftfreq(len(p), d=1.0 / fs)
    total = spec.sum()
    if total == 0:
        raise ValueError("field has no SSBI power")
    return float(spec[np.abs(f) <= bandwidth / 2].sum() / total)
