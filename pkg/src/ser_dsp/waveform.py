"""
QAM symbol generation and root-raised-cosine pulse shaping.

All filters in this package are applied circularly over the whole trace
(one FFT per trace). Traces therefore behave as one period of a periodic
signal, which keeps fiber memory and filter tails free of edge artifacts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QamFormat",
    "SymbolSequence",
    "Waveform",
    "constellation",
    "gray_labels",
    "gen_qam_symbols",
    "rrc_taps",
    "rrc_shape",
    "matched_filter",
    "circular_filter",
    "papr",
]


class QamFormat(str, enum.Enum):
    QAM4 = "QAM4"
    QAM16 = "QAM16"
    QAM32 = "QAM32"
    QAM64 = "QAM64"

    @property
    def order(self) -> int:
        return int(self.value[3:])

    @classmethod
    def parse(cls, value) -> "QamFormat":
        if isinstance(value, cls):
            return value
        key = str(value).upper().replace("-", "")
        if key.endswith("QAM") and key[:-3].isdigit():
            key = "QAM" + key[:-3]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unsupported constellation format: {value!r}") from None


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def _square_points(m: int) -> tuple[np.ndarray, np.ndarray]:
    side = int(round(np.sqrt(m)))
    bits_axis = side.bit_length() - 1
    levels = np.arange(side)
    amp = 2 * levels - side + 1
    ii, qq = np.meshgrid(levels, levels, indexing="ij")
    points = amp[ii] + 1j * amp[qq]
    labels = (_gray(ii) << bits_axis) | _gray(qq)
    return points.ravel(), labels.ravel()


def _cross32_points() -> tuple[np.ndarray, np.ndarray]:
    # 8x4 Gray rectangle; the |x| = 7 columns fold onto the |y| = 5 rows.
    xi = np.arange(8)
    yi = np.arange(4)
    ii, qq = np.meshgrid(xi, yi, indexing="ij")
    x = (2 * ii - 7).astype(float)
    y = (2 * qq - 3).astype(float)
    labels = (_gray(ii) << 2) | _gray(qq)
    outer = np.abs(x) == 7
    x_new = np.where(outer, np.sign(x) * (4 - np.abs(y)), x)
    y_new = np.where(outer, np.sign(y) * 5, y)
    return (x_new + 1j * y_new).ravel(), labels.ravel()


def constellation(fmt) -> np.ndarray:
    """Unit-mean-power point set of `fmt`, ordered by Gray label."""
    pts, labels = _raw_constellation(QamFormat.parse(fmt))
    out = np.empty_like(pts)
    out[labels] = pts
    return out / np.sqrt(np.mean(np.abs(out) ** 2))


def gray_labels(fmt) -> np.ndarray:
    """Bit labels for :func:`constellation` points (identity by construction)."""
    return np.arange(QamFormat.parse(fmt).order)


def _raw_constellation(fmt: QamFormat) -> tuple[np.ndarray, np.ndarray]:
    if fmt is QamFormat.QAM32:
        return _cross32_points()
    return _square_points(fmt.order)


@dataclass(frozen=True)
class SymbolSequence:
    symbols: np.ndarray
    format: QamFormat
    seed: int
    indices: np.ndarray = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled complex baseband field."""

    samples: np.ndarray
    sample_rate: float
    symbol_rate: float

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform contains NaN or Inf samples")
        if self.sample_rate <= 0 or self.symbol_rate <= 0:
            raise ValueError("sample_rate and symbol_rate must be positive")

    @property
    def samples_per_symbol(self) -> float:
        return self.sample_rate / self.symbol_rate

    @property
    def sps(self) -> int:
        return int(round(self.samples_per_symbol))

    def replace(self, samples) -> "Waveform":
        return Waveform(np.asarray(samples), self.sample_rate, self.symbol_rate)

    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


def gen_qam_symbols(fmt, n: int, seed: int) -> SymbolSequence:
    """
    Draw `n` i.i.d. uniform symbols from a normalized QAM constellation.

    Uses numpy's PCG64 generator through ``Generator.integers``, which maps
    draws to indices without platform-dependent rejection paths.
    """
    fmt = QamFormat.parse(fmt)
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = constellation(fmt)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, fmt.order, size=n)
    return SymbolSequence(pts[idx], fmt, int(seed), idx)


def rrc_taps(sps: int, rolloff: float, span: int) -> np.ndarray:
    """
    Root-raised-cosine FIR of odd length ``span * sps + 1``.

    Taps are scaled so that ``sum(h**2) == sps``, i.e. unit energy per symbol
    interval: shaping unit-power symbols gives a unit-power waveform and a
    lone symbol maps onto the tap vector itself.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError(f"rolloff must lie in [0, 1], got {rolloff}")
    if sps < 2:
        raise ValueError("sps must be >= 2")
    if span < 8:
        raise ValueError("span must be >= 8 symbols")
    n = span * sps + 1
    t = (np.arange(n) - (n - 1) / 2) / sps
    b = rolloff
    h = np.empty(n)
    zero = np.isclose(t, 0.0)
    if b > 0:
        edge = np.isclose(np.abs(t), 1.0 / (4 * b))
    else:
        edge = np.zeros(n, dtype=bool)
    reg = ~(zero | edge)
    tr = t[reg]
    num = np.sin(np.pi * tr * (1 - b)) + 4 * b * tr * np.cos(np.pi * tr * (1 + b))
    den = np.pi * tr * (1 - (4 * b * tr) ** 2)
    h[reg] = num / den
    h[zero] = 1 - b + 4 * b / np.pi
    if np.any(edge):
        h[edge] = (b / np.sqrt(2)) * (
            (1 + 2 / np.pi) * np.sin(np.pi / (4 * b))
            + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b))
        )
    return h * np.sqrt(sps / np.sum(h**2))


def circular_filter(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Circular convolution with a tap vector centred on index ``len(taps)//2``."""
    x = np.asarray(x)
    taps = np.asarray(taps)
    n = x.shape[-1]
    kernel = np.zeros(n, dtype=np.result_type(taps.dtype, float))
    pos = (np.arange(len(taps)) - len(taps) // 2) % n
    np.add.at(kernel, pos, taps)
    y = np.fft.ifft(np.fft.fft(x) * np.fft.fft(kernel))
    if np.isrealobj(x) and np.isrealobj(taps):
        return y.real
    return y


def rrc_shape(
    symbols, sps: int = 2, rolloff: float = 0.01, span: int = 256, symbol_rate: float = 100e9
) -> Waveform:
    """
    Upsample and RRC-filter a symbol sequence.

    Parameters
    ----------
    symbols : SymbolSequence or array_like
        Complex symbols at one sample per symbol.
    sps : int
        Samples per symbol of the output.
    rolloff, span : float, int
        RRC roll-off and filter span in symbols.
    symbol_rate : float
        Baud rate attached to the waveform metadata.
    """
    s = np.asarray(getattr(symbols, "symbols", symbols), dtype=complex)
    taps = rrc_taps(sps, rolloff, span)
    up = np.zeros(len(s) * sps, dtype=complex)
    up[::sps] = s
    return Waveform(circular_filter(up, taps), symbol_rate * sps, symbol_rate)


def matched_filter(x: np.ndarray, sps: int, rolloff: float, span: int) -> np.ndarray:
    """Matched RRC filter, normalized so that symbol-rate samples equal the symbols."""
    return circular_filter(x, rrc_taps(sps, rolloff, span) / sps)


def papr(w) -> float:
    """Peak-to-average power ratio in dB."""
    x = np.asarray(getattr(w, "samples", w))
    if x.size == 0:
        raise ValueError("empty waveform")
    p = np.abs(x) ** 2
    mean = np.mean(p)
    if mean == 0:
        raise ValueError("zero-power waveform has no PAPR")
    return float(10 * np.log10(np.max(p) / mean))
