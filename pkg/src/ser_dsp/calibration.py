"""
Self-calibration of transmitter and receiver responses.

Four real FIR filters surround a nonlinear inversion block::

    Rb1 -> H11 -> I1 --+                 +-- I2 -> H12 -> I3 --+
                       | inversion block |                     +--> d = I3^2 + Q3^2
    Rb2 -> H21 -> Q1 --+                 +-- Q2 -> H22 -> Q3 --+

with ``Rb = (R - A^2) / (2A)``. The taps are adapted by LMS so that ``d(n)``
matches the known training intensity ``|s(n)|^2``. Because the cost only sees
intensities it is blind to carrier phase. At the optimum ``H11``/``H21``
invert the receiver responses and ``H12``/``H22`` the transmitter ones.

The tap gradient is exact for the instantaneous cost: the ``L`` block
inputs feeding ``H12``/``H22`` are recomputed from a ``2L - 1`` sample window
with the current ``H11``/``H21`` at every step.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .frontend import FrontEndConfig, detect, estimate_lo_amplitude, set_lospr, supergaussian_response
from .waveform import Waveform, gen_qam_symbols, rrc_shape

__all__ = [
    "InversionBlock",
    "CalibrationState",
    "CalibrationDiverged",
    "ResponseEstimate",
    "TrainingCapture",
    "initial_state",
    "preprocess",
    "invert_ic1",
    "invert_dfr_block",
    "block_jacobian",
    "circuit_output",
    "instantaneous_cost",
    "tap_gradients",
    "calibrate",
    "windowed_mse",
    "align_training",
    "extract_responses",
    "filter_response",
    "training_capture",
    "write_taps",
    "write_cost_trace",
    "write_responses",
]


class InversionBlock(str, enum.Enum):
    DFR = "DFR_BLOCK"
    IC1 = "IC1_BLOCK"


class CalibrationDiverged(RuntimeError):
    def __init__(self, index: int):
        super().__init__(f"calibration cost became non-finite at sample {index}")
        self.index = index


@dataclass
class CalibrationState:
    """
    Taps and settings of the calibration circuit.

    ``cost_trace`` holds ``e(n)**2`` per processed sample and
    ``signal_norm`` the mean ``|s|**4`` used to normalize it.
    """

    h11: np.ndarray
    h12: np.ndarray
    h21: np.ndarray
    h22: np.ndarray
    mu1: float
    mu2: float
    a: float
    inversion: InversionBlock = InversionBlock.DFR
    cost_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    signal_norm: float = 1.0

    def __post_init__(self):
        taps = [np.array(getattr(self, k), dtype=float) for k in ("h11", "h12", "h21", "h22")]
        n = {t.size for t in taps}
        if len(n) != 1 or 0 in n or any(t.ndim != 1 for t in taps):
            raise ValueError("all four filters must be 1-D with the same non-zero length")
        self.h11, self.h12, self.h21, self.h22 = taps
        self.inversion = InversionBlock(self.inversion)
        self.cost_trace = np.asarray(self.cost_trace, dtype=float)
        if not np.all(np.isfinite(self.cost_trace)):
            raise ValueError("cost trace must be finite")
        if not self.a > 0:
            raise ValueError("LO amplitude must be positive")

    @property
    def length(self) -> int:
        return self.h11.size


def initial_state(
    a: float,
    length: int = 33,
    mu1: float = 1e-3,
    mu2: float = 1e-3,
    inversion=InversionBlock.DFR,
) -> CalibrationState:
    """Identity filters (unit centre tap) of odd `length`."""
    if length < 1 or length % 2 == 0:
        raise ValueError("filter length must be odd and positive")
    h = np.zeros(length)
    h[length // 2] = 1.0
    return CalibrationState(h, h, h, h, mu1, mu2, a, InversionBlock(inversion))


def preprocess(r: np.ndarray, a: float | None = None) -> tuple[np.ndarray, float]:
    """``Rb = (R - A^2) / (2A)``; `a` is estimated from the trace when omitted."""
    r = np.asarray(r, dtype=float)
    if a is None:
        a = estimate_lo_amplitude(r)
    return (r - a * a) / (2 * a), float(a)


def invert_ic1(i1, q1, a: float = 0.5):
    """
    One step of SSBI cancellation, ``x - (i1^2 + q1^2) / (2a)``.

    With ``a = 1/2`` (the normalized units of ``Rb``) this is
    ``i1 - (i1^2 + q1^2)``.
    """
    i1 = np.asarray(i1, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if i1.shape != q1.shape:
        raise ValueError("i1 and q1 must have equal lengths")
    p = (i1 * i1 + q1 * q1) / (2 * a)
    return i1 - p, q1 - p


def _dfr_parts(i1, q1, a):
    u1 = np.asarray(i1, dtype=float) / (2 * a)
    u2 = np.asarray(q1, dtype=float) / (2 * a)
    d = u1 - u2
    z = 1 + 4 * (u1 + u2 - d * d)
    root = np.sqrt(np.abs(z))
    return d, z, root


def invert_dfr_block(i1, q1, a: float):
    """
    Closed-form field reconstruction applied to ``Rb``-scaled inputs.

    Solves ``x1 = I + (I^2+Q^2)/(2a)``, ``x2 = Q + (I^2+Q^2)/(2a)`` on the
    ``I + Q + a >= 0`` branch, taking ``|discriminant|`` when it is negative.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if np.shape(i1) != np.shape(q1):
        raise ValueError("i1 and q1 must have equal lengths")
    d, _, root = _dfr_parts(i1, q1, a)
    i2 = 2 * a * (root - 1 + 2 * d) / 4
    q2 = 2 * a * (root - 1 - 2 * d) / 4
    return i2, q2


def block_jacobian(i1, q1, a: float, inversion=InversionBlock.DFR):
    """
    Per-sample partials ``(dI2/dI1, dI2/dQ1, dQ2/dI1, dQ2/dQ1)`` of the block.

    The DFR block's partials are undefined where its discriminant is zero.
    """
    i1 = np.asarray(i1, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if InversionBlock(inversion) is InversionBlock.IC1:
        return 1 - i1 / a, -q1 / a, -i1 / a, 1 - q1 / a
    d, z, root = _dfr_parts(i1, q1, a)
    k = 2 * np.sign(z) / np.maximum(root, 1e-12)
    dr1 = k * (1 - 2 * d)
    dr2 = k * (1 + 2 * d)
    return (dr1 + 2) / 4, (dr2 - 2) / 4, (dr1 - 2) / 4, (dr2 + 2) / 4


def _invert(state: CalibrationState, i1, q1):
    if state.inversion is InversionBlock.IC1:
        return invert_ic1(i1, q1, state.a)
    return invert_dfr_block(i1, q1, state.a)


def _windows(rb: np.ndarray, length: int) -> np.ndarray:
    # row m holds Rb[m + c], ..., Rb[m - c] so that row @ h is (Rb * h)[m + c]
    return sliding_window_view(rb, length)[:, ::-1]


def _forward(state, m1, m2):
    i1 = m1 @ state.h11
    q1 = m2 @ state.h21
    i2, q2 = _invert(state, i1, q1)
    i3 = state.h12 @ i2[::-1]
    q3 = state.h22 @ q2[::-1]
    return i1, q1, i2, q2, i3, q3


def _grads(state, m1, m2, fwd):
    """Partials of ``d`` with respect to (h11, h12, h21, h22)."""
    i1, q1, i2, q2, i3, q3 = fwd
    j11, j12, j21, j22 = block_jacobian(i1, q1, state.a, state.inversion)
    ci = 2 * i3 * state.h12[::-1]
    cq = 2 * q3 * state.h22[::-1]
    g1 = ci * j11 + cq * j21
    g2 = ci * j12 + cq * j22
    return g1 @ m1, 2 * i3 * i2[::-1], g2 @ m2, 2 * q3 * q2[::-1]


def _window_at(rb1, rb2, n, length):
    c = length // 2
    lo = n - 2 * c
    if lo < 0 or n + 2 * c >= len(rb1):
        raise IndexError(f"sample {n} lacks a full {2 * length - 1} sample window")
    m1 = _windows(rb1[lo : n + 2 * c + 1], length)
    m2 = _windows(rb2[lo : n + 2 * c + 1], length)
    return m1, m2


def circuit_output(state: CalibrationState, rb1, rb2, n: int) -> tuple[float, float]:
    """``(I3(n), Q3(n))`` of the circuit at sample `n`."""
    m1, m2 = _window_at(np.asarray(rb1, float), np.asarray(rb2, float), n, state.length)
    fwd = _forward(state, m1, m2)
    return float(fwd[4]), float(fwd[5])


def instantaneous_cost(state: CalibrationState, rb1, rb2, target_power: float, n: int) -> float:
    """``e(n)^2`` with ``e = |s(n)|^2 - I3^2 - Q3^2``."""
    i3, q3 = circuit_output(state, rb1, rb2, n)
    e = target_power - (i3 * i3 + q3 * q3)
    return e * e


def tap_gradients(state: CalibrationState, rb1, rb2, target_power: float, n: int):
    """Gradients of ``e(n)^2`` with respect to ``(h11, h12, h21, h22)``."""
    m1, m2 = _window_at(np.asarray(rb1, float), np.asarray(rb2, float), n, state.length)
    fwd = _forward(state, m1, m2)
    e = target_power - (fwd[4] ** 2 + fwd[5] ** 2)
    return tuple(-2 * e * g for g in _grads(state, m1, m2, fwd))


def calibrate(
    r1,
    r2,
    training,
    state0: CalibrationState,
    *,
    n_samples: int | None = None,
    start: int | None = None,
    preprocessed: bool = False,
    adapt_window: int | None = 4096,
) -> CalibrationState:
    """
    Run the LMS loop over aligned photocurrents and training field.

    Parameters
    ----------
    r1, r2 : array_like
        Photocurrents at the working rate, aligned with `training`.
    training : Waveform or array_like
        Complex training field ``s(n)`` on the same sample grid.
    state0 : CalibrationState
        Starting taps and step sizes. It is not modified.
    n_samples : int, optional
        Number of updates; defaults to every sample with a full window.
    start : int, optional
        First sample index; defaults to the first one with a full window.
    preprocessed : bool
        `r1`/`r2` are already ``Rb`` traces.
    adapt_window : int or None
        Both step sizes are halved whenever the mean cost over a block of
        this many samples exceeds that of the previous block. ``None``
        keeps them fixed.

    Returns
    -------
    CalibrationState
        Updated taps and step sizes, with the new per-sample costs appended.

    Raises
    ------
    CalibrationDiverged
        If the cost stops being finite.
    """
    s = np.asarray(getattr(training, "samples", training))
    if preprocessed:
        rb1 = np.asarray(r1, dtype=float)
        rb2 = np.asarray(r2, dtype=float)
    else:
        rb1, _ = preprocess(r1, state0.a)
        rb2, _ = preprocess(r2, state0.a)
    if not (len(rb1) == len(rb2) == len(s)):
        raise ValueError("photocurrents and training must have equal lengths")
    target = np.abs(s) ** 2
    length = state0.length
    c = length // 2
    first = 2 * c if start is None else start
    last = len(rb1) - 2 * c
    if n_samples is None:
        n_samples = last - first
    if first < 2 * c or first + n_samples > last:
        raise ValueError("requested range runs past the available windows")
    w1 = _windows(rb1, length)
    w2 = _windows(rb2, length)
    st = replace(
        state0,
        h11=state0.h11.copy(),
        h12=state0.h12.copy(),
        h21=state0.h21.copy(),
        h22=state0.h22.copy(),
    )
    mu1, mu2 = st.mu1, st.mu2
    costs = np.empty(n_samples)
    prev_block = np.inf
    # divergence is caught by the finiteness check on e
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_samples):
            n = first + k
            m1 = w1[n - 2 * c : n + 1]
            m2 = w2[n - 2 * c : n + 1]
            fwd = _forward(st, m1, m2)
            e = target[n] - (fwd[4] * fwd[4] + fwd[5] * fwd[5])
            if not np.isfinite(e):
                raise CalibrationDiverged(n)
            costs[k] = e * e
            g11, g12, g21, g22 = _grads(st, m1, m2, fwd)
            st.h11 += mu1 * e * g11
            st.h21 += mu1 * e * g21
            st.h12 += mu2 * e * g12
            st.h22 += mu2 * e * g22
            if adapt_window and (k + 1) % adapt_window == 0:
                block = costs[k + 1 - adapt_window : k + 1].mean()
                if block > prev_block:
                    mu1 /= 2
                    mu2 /= 2
                prev_block = block
    st.mu1, st.mu2 = mu1, mu2
    st.cost_trace = np.concatenate((state0.cost_trace, costs))
    st.signal_norm = float(np.mean(target**2))
    return st


def windowed_mse(state: CalibrationState, window: int = 1024) -> np.ndarray:
    """Normalized cost ``mean(e^2) / mean(|s|^4)`` over consecutive blocks, in dB."""
    c = state.cost_trace
    nb = len(c) // window
    if nb == 0:
        raise ValueError("cost trace shorter than one window")
    blocks = c[: nb * window].reshape(nb, window).mean(axis=1)
    return 10 * np.log10(blocks / state.signal_norm)


def align_training(r1, training, max_lag: int | None = None) -> int:
    """
    Lag ``k`` such that ``r1[n]`` lines up with ``|s(n - k)|^2``.

    Found by circular cross-correlation of the mean-removed intensity with
    the mean-removed photocurrent.
    """
    x = np.asarray(r1, dtype=float)
    p = np.abs(np.asarray(getattr(training, "samples", training))) ** 2
    if len(x) != len(p):
        raise ValueError("r1 and training must have equal lengths")
    xc = np.fft.ifft(np.fft.fft(x - x.mean()) * np.conj(np.fft.fft(p - p.mean()))).real
    lags = np.arange(len(x))
    lags = np.where(lags > len(x) // 2, lags - len(x), lags)
    if max_lag is not None:
        xc = np.where(np.abs(lags) <= max_lag, xc, -np.inf)
    return int(lags[np.argmax(xc)])


@dataclass(frozen=True)
class ResponseEstimate:
    freqs: np.ndarray
    rx_response_1: np.ndarray
    rx_response_2: np.ndarray
    tx_response_1: np.ndarray
    tx_response_2: np.ndarray


def filter_response(taps: np.ndarray, freqs: np.ndarray, sample_rate: float) -> np.ndarray:
    """Frequency response of a centred FIR at `freqs`."""
    taps = np.asarray(taps, dtype=float)
    k = np.arange(taps.size) - taps.size // 2
    return np.exp(-2j * np.pi * np.outer(freqs, k) / sample_rate) @ taps


def _reciprocal(taps, freqs, sample_rate):
    h = filter_response(taps, freqs, sample_rate)
    if np.any(np.abs(h) < 1e-12):
        raise ValueError("filter response vanishes on the grid; reciprocal undefined")
    h0 = filter_response(taps, np.zeros(1), sample_rate)[0]
    if abs(h0) < 1e-12:
        raise ValueError("filter has no DC gain")
    r = h0 / h
    ph = np.unwrap(np.angle(r[np.argsort(freqs)]))
    f = np.sort(freqs)
    if f.size > 1 and np.ptp(f) > 0:
        slope = np.sum(f * ph) / np.sum(f * f)
        r = r * np.exp(-1j * slope * freqs)
    return r


def extract_responses(state: CalibrationState, freqs, sample_rate: float) -> ResponseEstimate:
    """
    Transmitter and receiver responses implied by converged taps.

    Each estimate is the reciprocal of a filter's response, scaled to unit
    gain at DC with the best-fit linear phase (pure delay) removed.
    """
    f = np.asarray(freqs, dtype=float)
    return ResponseEstimate(
        f,
        _reciprocal(state.h11, f, sample_rate),
        _reciprocal(state.h21, f, sample_rate),
        _reciprocal(state.h12, f, sample_rate),
        _reciprocal(state.h22, f, sample_rate),
    )


@dataclass(frozen=True)
class TrainingCapture:
    """Simulated calibration capture at the working rate."""

    r1: np.ndarray
    r2: np.ndarray
    training: Waveform
    a: float
    sample_rate: float
    f3db_tx: float
    f3db_rx: float
    order: int

    def true_rx(self, freqs) -> np.ndarray:
        return supergaussian_response(np.asarray(freqs, float), self.f3db_rx, self.order)

    def true_tx(self, freqs) -> np.ndarray:
        return supergaussian_response(np.asarray(freqs, float), self.f3db_tx, self.order)


def _freq_filter(x: np.ndarray, fs: float, f3db: float, order: int) -> np.ndarray:
    f = np.fft.fftfreq(len(x), d=1.0 / fs)
    y = np.fft.ifft(np.fft.fft(x) * supergaussian_response(f, f3db, order))
    return y.real if np.isrealobj(x) else y


def training_capture(
    n_symbols: int = 60_000,
    seed: int = 0,
    *,
    fmt="QAM16",
    lospr_db: float = 13.0,
    f3db_tx: float = 35e9,
    f3db_rx: float = 35e9,
    order: int = 2,
    symbol_rate: float = 100e9,
    rolloff: float = 0.01,
    oversample: int = 2,
) -> TrainingCapture:
    """
    Simulate a calibration capture with super-Gaussian Tx and Rx responses.

    The field and the photocurrents are modelled at ``2 * oversample``
    samples per symbol so the analog receiver response acts before the ADC;
    the returned traces are decimated to 2 samples per symbol. The training
    field is the transmitted waveform before the Tx response.
    """
    sps_hi = 2 * oversample
    syms = gen_qam_symbols(fmt, n_symbols, seed)
    s_hi = rrc_shape(syms, sps_hi, rolloff, 256, symbol_rate)
    fs_hi = s_hi.sample_rate
    rx_field = s_hi.replace(_freq_filter(np.asarray(s_hi.samples), fs_hi, f3db_tx, order))
    cfg = set_lospr(rx_field, lospr_db, FrontEndConfig())
    pair = detect(rx_field, cfg)
    r1 = _freq_filter(np.asarray(pair.r1), fs_hi, f3db_rx, order)[::oversample]
    r2 = _freq_filter(np.asarray(pair.r2), fs_hi, f3db_rx, order)[::oversample]
    training = Waveform(np.asarray(s_hi.samples)[::oversample], fs_hi / oversample, symbol_rate)
    return TrainingCapture(r1, r2, training, cfg.a1, fs_hi / oversample, f3db_tx, f3db_rx, order)


def write_taps(path, state: CalibrationState) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("tap_index", "h11", "h12", "h21", "h22"))
        for k in range(state.length):
            w.writerow(
                [k - state.length // 2]
                + [format(float(h[k]), ".12g") for h in (state.h11, state.h12, state.h21, state.h22)]
            )


def write_cost_trace(path, state: CalibrationState, window: int = 1024) -> None:
    mse = windowed_mse(state, window)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("sample_index", "mse_db"))
        for k, v in enumerate(mse):
            w.writerow([(k + 1) * window, format(float(v), ".12g")])


def write_responses(path, est: ResponseEstimate) -> None:
    cols = (
        ("rx1", est.rx_response_1),
        ("rx2", est.rx_response_2),
        ("tx1", est.tx_response_1),
        ("tx2", est.tx_response_2),
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["frequency_hz"]
        for name, _ in cols:
            header += [f"{name}_magnitude_db", f"{name}_phase_rad"]
        w.writerow(header)
        for k, f in enumerate(est.freqs):
            row = [format(float(f), ".12g")]
            for _, h in cols:
                row += [
                    format(float(20 * np.log10(abs(h[k]))), ".12g"),
                    format(float(np.angle(h[k])), ".12g"),
                ]
            w.writerow(row)
