"""Fast built-in invariant checks, runnable without the test suite."""

from __future__ import annotations

import numpy as np

from . import calibration as cal
from . import dynamics as dyn
from .frontend import FrontEndConfig, detect, ssbi_inband_fraction
from .reconstruct import Method, dfr, gd_gradient, gd_objective, mult_count
from .rxdsp import q_func
from .waveform import Waveform, gen_qam_symbols, matched_filter, rrc_shape

__all__ = ["CHECKS", "run_selfcheck"]


def _dfr_exact():
    rng = np.random.default_rng(0)
    x = 0.2 * (rng.standard_normal(4096) + 1j * rng.standard_normal(4096))
    x = x[x.real + x.imag + 1 >= 0]
    pair = detect(Waveform(x, 2.0, 1.0), FrontEndConfig())
    r = dfr(pair, 1.0)
    err = max(np.max(np.abs(r.i_hat - x.real)), np.max(np.abs(r.q_hat - x.imag)))
    return err < 1e-9, f"max error {err:.2e}"


def _gd_gradient():
    rng = np.random.default_rng(1)
    ib, qb, u1, u2 = rng.uniform(-0.5, 0.5, (4, 100))
    gi, gq = gd_gradient(ib, qb, u1, u2)
    h = 1e-6
    fi = (gd_objective(ib + h, qb, u1, u2) - gd_objective(ib - h, qb, u1, u2)) / (2 * h)
    fq = (gd_objective(ib, qb + h, u1, u2) - gd_objective(ib, qb - h, u1, u2)) / (2 * h)
    err = max(np.max(np.abs(gi - fi) / np.abs(fi).max()), np.max(np.abs(gq - fq) / np.abs(fq).max()))
    return err < 1e-6, f"relative error {err:.2e}"


def _mult_counts():
    ok = mult_count(Method.DFR) == 10 and mult_count(Method.CIC, 20) == 42
    ok = ok and mult_count(Method.GD, 20) == 122
    return ok, "10 / 2N+2 / 6N+2"


def _fixed_points():
    ok = dyn.fixed_points(0) == (-1.0, 0.0) and dyn.fixed_points(2) == (-2.0, 1.0)
    c = dyn.classify(-1.0, 0.1)
    ok = ok and c.kind is dyn.ConvergenceClass.OFFSET and abs(c.offset - 0.5) < 1e-12
    return ok, "map fixed points and one offset class"


def _rrc_round_trip():
    s = gen_qam_symbols("QAM16", 4096, 0)
    w = rrc_shape(s, 2, 0.01, 256)
    z = matched_filter(w.samples, 2, 0.01, 256)[::2]
    evm = 10 * np.log10(np.mean(np.abs(z - s.symbols) ** 2))
    return evm < -40, f"EVM {evm:.1f} dB"


def _ssbi_fraction():
    rng = np.random.default_rng(2)
    n = 1 << 16
    spec = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    f = np.fft.fftfreq(n)
    spec[np.abs(f) > 0.25] = 0
    w = Waveform(np.fft.ifft(spec), 1.0, 0.5)
    frac = ssbi_inband_fraction(w, 0.5)
    return abs(frac - 0.75) < 0.01, f"in-band fraction {frac:.4f}"


def _lms_gradient():
    rng = np.random.default_rng(3)
    rb1, rb2 = 0.3 * rng.standard_normal((2, 200))
    worst = 0.0
    for block in cal.InversionBlock:
        st = cal.initial_state(2.0, 9, inversion=block)
        for h in (st.h11, st.h12, st.h21, st.h22):
            h += 0.1 * rng.standard_normal(9)
        g = cal.tap_gradients(st, rb1, rb2, 0.2, 100)
        for name, gk in zip(("h11", "h12", "h21", "h22"), g):
            taps = getattr(st, name)
            fd = np.empty(taps.size)
            for k in range(taps.size):
                old = taps[k]
                taps[k] = old + 1e-6
                cp = cal.instantaneous_cost(st, rb1, rb2, 0.2, 100)
                taps[k] = old - 1e-6
                cm = cal.instantaneous_cost(st, rb1, rb2, 0.2, 100)
                taps[k] = old
                fd[k] = (cp - cm) / 2e-6
            worst = max(worst, np.max(np.abs(fd - gk)) / np.max(np.abs(fd)))
    return worst < 1e-5, f"relative error {worst:.2e}"


def _q_func():
    ok = q_func(0) == 0.5 and abs(q_func(2.512) - 6.0e-3) < 1e-4
    return ok, f"Q(2.512) = {q_func(2.512):.4e}"


CHECKS = {
    "dfr_exact": _dfr_exact,
    "gd_gradient": _gd_gradient,
    "mult_counts": _mult_counts,
    "fixed_points": _fixed_points,
    "rrc_round_trip": _rrc_round_trip,
    "ssbi_inband_fraction": _ssbi_fraction,
    "lms_gradient": _lms_gradient,
    "q_func": _q_func,
}


def run_selfcheck() -> list[tuple[str, bool, str]]:
    return [(name, *fn()) for name, fn in CHECKS.items()]
