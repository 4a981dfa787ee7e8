"""
Field reconstruction for single-ended receivers.

Three SSBI mitigation schemes recover ``(I, Q)`` from the two photocurrents:

* ``dfr``  closed-form inversion of the two quadratic detection equations,
* ``cic``  (clipped) iterative SSBI cancellation,
* ``gd``   gradient descent on the squared residual of the detection equations,

plus ``raw_passthrough``, the conventional receiver that ignores SSBI.

The iterative schemes and the balanced DFR work in normalized coordinates::

    U1 = (R1 - A^2) / (4 A^2) = Ib^2 + Qb^2 + Ib,    Ib = I / (2A)
    U2 = (R2 - A^2) / (4 A^2) = Ib^2 + Qb^2 + Qb,    Qb = Q / (2A)

Every per-sample multiplication goes through a `_Tally`, so
``ReconstructionResult.real_mults_per_sample`` is measured, not looked up.
The normalization ``R -> U`` is counted (2 multiplications); the final
``2A`` de-normalization is not, since it folds into the downstream gain.
Trace-level statistics (means, clip references) are computed once over the
whole trace before any per-sample work, so results do not depend on how the
per-sample arithmetic is partitioned.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .frontend import PhotocurrentPair

__all__ = [
    "Method",
    "ClipTarget",
    "ClipSpec",
    "ReconstructionResult",
    "dfr",
    "dfr_discriminant",
    "cic",
    "gd",
    "gd_objective",
    "gd_gradient",
    "gd_error_norm",
    "mult_count",
    "raw_passthrough",
    "normalize",
    "SATURATION",
]

# Magnitude guard for diverging iterates (normalized units); physical
# samples are O(1), so only runaway samples ever reach it.
SATURATION = 1e12


class Method(str, enum.Enum):
    DFR = "DFR"
    CIC = "CIC"
    GD = "GD"
    RAW = "RAW"


class ClipTarget(str, enum.Enum):
    SSBI_ESTIMATE = "SSBI_ESTIMATE"
    IQ_BRANCHES = "IQ_BRANCHES"


@dataclass(frozen=True)
class ClipSpec:
    """Clip level in dB above the reference average power of the clipped signal."""

    level_db: float
    target: ClipTarget = ClipTarget.SSBI_ESTIMATE

    def __post_init__(self):
        if not np.isfinite(self.level_db):
            raise ValueError("clip level must be finite")
        object.__setattr__(self, "target", ClipTarget(self.target))

    @property
    def factor(self) -> float:
        return 10 ** (self.level_db / 10)


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    i_hat: np.ndarray
    q_hat: np.ndarray
    iterations: int
    real_mults_per_sample: int
    clip_events: int
    method: Method


class _Tally:
    """Counts per-sample real multiplications (a square root costs 4)."""

    SQRT_COST = 4

    def __init__(self):
        self.count = 0

    def mul(self, x, y):
        self.count += 1
        return x * y

    def sqrt(self, x):
        self.count += self.SQRT_COST
        return np.sqrt(x)


def _traces(pair):
    if isinstance(pair, PhotocurrentPair):
        return np.asarray(pair.r1, dtype=float), np.asarray(pair.r2, dtype=float)
    r1, r2 = pair
    return np.asarray(r1, dtype=float), np.asarray(r2, dtype=float)


def _check_amplitudes(*amps):
    for a in amps:
        if not a > 0:
            raise ValueError("LO amplitudes must be positive")


def normalize(r1, r2, a1: float, a2: float | None = None, ops: _Tally | None = None):
    """Map photocurrents to ``(U1, U2)``; each branch uses its own amplitude."""
    a2 = a1 if a2 is None else a2
    ops = ops or _Tally()
    u1 = ops.mul(r1 - a1 * a1, 1.0 / (4 * a1 * a1))
    u2 = ops.mul(r2 - a2 * a2, 1.0 / (4 * a2 * a2))
    return u1, u2


def dfr_discriminant(r1, r2, a1: float, a2: float) -> np.ndarray:
    """``4 R1 R2 - (R1 + R2 - a1^2 - a2^2)^2``; equals ``4A^2 (I+Q+A)^2`` when balanced."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    ax2 = a1 * a1 + a2 * a2
    return 4 * r1 * r2 - (r1 + r2 - ax2) ** 2


def dfr(pair, a1: float, a2: float | None = None) -> ReconstructionResult:
    """
    Direct field reconstruction.

    Returns the "+" root of the detection equations with ``|Delta|`` under the
    square root. The result is exact for noiseless, full-bandwidth input
    whenever ``a2*I + a1*Q + a1*a2 >= 0`` (``I + Q + A >= 0`` when balanced).
    """
    a2 = a1 if a2 is None else a2
    _check_amplitudes(a1, a2)
    r1, r2 = _traces(pair)
    ops = _Tally()
    if a1 == a2:
        # Balanced: with S = U1+U2, D = U1-U2 the sum T = Ib+Qb solves
        # T^2 + T + D^2 - S = 0, so Ib = (sqrt(1+4(S-D^2)) - 1 + 2D)/4.
        u1, u2 = normalize(r1, r2, a1, a2, ops)
        s = u1 + u2
        d = u1 - u2
        disc = 1.0 + ops.mul(4.0, s - ops.mul(d, d))
        root = ops.sqrt(np.abs(disc))
        ib = ops.mul(root - 1.0 + (d + d), 0.25)
        qb = ops.mul(root - 1.0 - (d + d), 0.25)
        i_hat, q_hat = 2 * a1 * ib, 2 * a2 * qb
    else:
        ax2 = a1 * a1 + a2 * a2
        diff = r1 - r2
        t = r1 + r2 - ax2
        delta = ops.mul(4.0, ops.mul(r1, r2)) - ops.mul(t, t)
        root = ops.sqrt(np.abs(delta))
        k = 1.0 / (2 * ax2)
        i_hat = -a1 / 2 + ops.mul(diff, a1 * k) + ops.mul(root, a2 * k)
        q_hat = -a2 / 2 - ops.mul(diff, a2 * k) + ops.mul(root, a1 * k)
    return ReconstructionResult(i_hat, q_hat, 0, ops.count, 0, Method.DFR)


def _initial_guess(u1, u2, offset):
    if offset is None:
        m1, m2 = float(np.mean(u1)), float(np.mean(u2))
    elif np.ndim(offset) == 0:
        m1 = m2 = float(offset)
    else:
        m1, m2 = (float(v) for v in offset)
    return u1 - m1, u2 - m2


def cic(
    pair,
    a: float,
    n_iter: int,
    clip: ClipSpec | None = None,
    *,
    a2: float | None = None,
    offset=None,
    callback=None,
) -> ReconstructionResult:
    """
    Iterative SSBI cancellation, optionally clipped.

    Parameters
    ----------
    pair : PhotocurrentPair or (r1, r2)
    a : float
        LO amplitude of branch 1 (and branch 2 unless `a2` is given).
    n_iter : int
        Number of cancellation iterations; 0 returns the initial guess.
    clip : ClipSpec, optional
        Ceiling applied to the SSBI estimate ``Ib^2 + Qb^2`` before it is
        subtracted, at ``level_db`` above the mean of the initial estimate.
    offset : float or (float, float), optional
        Constant removed from ``U1, U2`` for the initial guess. Defaults to
        the empirical trace means, which makes the initial guess zero-mean.
    callback : callable, optional
        Called as ``callback(k, i_hat, q_hat)`` after iteration ``k``
        (1-based) with the de-normalized estimates.

    Notes
    -----
    With ``a2 != a`` the SSBI term seen by each normalized branch carries the
    amplitude ratio, ``U1 = Ib^2 + (a2/a)^2 Qb^2 + Ib``; the iteration uses
    that exact form (two extra multiplications per iteration).
    """
    a2 = a if a2 is None else a2
    _check_amplitudes(a, a2)
    if n_iter < 0:
        raise ValueError("n_iter must be >= 0")
    r1, r2 = _traces(pair)
    ops = _Tally()
    u1, u2 = normalize(r1, r2, a, a2, ops)
    ib, qb = _initial_guess(u1, u2, offset)
    balanced = a == a2
    ratio = (a2 / a) ** 2
    thr = None
    if clip is not None:
        if clip.target is not ClipTarget.SSBI_ESTIMATE:
            raise ValueError("CIC clips the SSBI estimate only")
        thr = clip.factor * float(np.mean(ib * ib + qb * qb))
    events = 0
    for k in range(n_iter):
        if balanced:
            p = ops.mul(ib, ib) + ops.mul(qb, qb)
            p1 = p2 = p
        else:
            pi_, pq = ops.mul(ib, ib), ops.mul(qb, qb)
            p1 = pi_ + ops.mul(pq, ratio)
            p2 = ops.mul(pi_, 1.0 / ratio) + pq
        if thr is not None:
            events += int(np.count_nonzero(p1 > thr))
            if not balanced:
                events += int(np.count_nonzero(p2 > thr))
            p1 = np.minimum(p1, thr)
            p2 = p1 if balanced else np.minimum(p2, thr)
        p1 = np.minimum(p1, SATURATION)
        p2 = p1 if balanced else np.minimum(p2, SATURATION)
        ib = u1 - p1
        qb = u2 - p2
        if callback is not None:
            callback(k + 1, 2 * a * ib, 2 * a2 * qb)
    return ReconstructionResult(2 * a * ib, 2 * a2 * qb, n_iter, ops.count, events, Method.CIC)


def gd_objective(ib, qb, u1, u2, ratio: float = 1.0):
    """``G = X^2 + Y^2`` with X, Y the residuals of the two detection equations."""
    x = ib * ib + ratio * qb * qb + ib - u1
    y = ib * ib / ratio + qb * qb + qb - u2
    return x * x + y * y


def gd_gradient(ib, qb, u1, u2, ratio: float = 1.0):
    """Exact gradient ``(dG/dIb, dG/dQb)`` of :func:`gd_objective`."""
    x = ib * ib + ratio * qb * qb + ib - u1
    y = ib * ib / ratio + qb * qb + qb - u2
    gi = 2 * (x * (2 * ib + 1) + y * (2 * ib / ratio))
    gq = 2 * (x * (2 * ratio * qb) + y * (2 * qb + 1))
    return gi, gq


def gd(
    pair,
    a: float,
    n_iter: int,
    mu: float = 0.05,
    clip: ClipSpec | None = None,
    *,
    a2: float | None = None,
    offset=None,
    callback=None,
) -> ReconstructionResult:
    """
    Gradient-descent field reconstruction.

    Each step moves ``(Ib, Qb)`` by ``-mu/2`` times the exact gradient of
    ``G = X^2 + Y^2`` (the factor 2 lives in `mu`). With ``S = X + Y`` the
    balanced update is ``Ib -= mu (2 S Ib + X)``, ``Qb -= mu (2 S Qb + Y)``,
    which costs 6 multiplications per iteration.

    A clip with target ``IQ_BRANCHES`` limits ``|Ib|`` and ``|Qb|`` after
    every step to ``level_db`` above the mean power of each initial branch.
    `callback` is invoked as in :func:`cic`.
    """
    a2 = a if a2 is None else a2
    _check_amplitudes(a, a2)
    if n_iter < 0:
        raise ValueError("n_iter must be >= 0")
    if not mu > 0:
        raise ValueError("mu must be positive")
    r1, r2 = _traces(pair)
    ops = _Tally()
    u1, u2 = normalize(r1, r2, a, a2, ops)
    ib, qb = _initial_guess(u1, u2, offset)
    balanced = a == a2
    ratio = (a2 / a) ** 2
    lim_i = lim_q = SATURATION
    if clip is not None:
        if clip.target is not ClipTarget.IQ_BRANCHES:
            raise ValueError("GD clips the I and Q branches only")
        lim_i = np.sqrt(clip.factor * float(np.mean(ib * ib)))
        lim_q = np.sqrt(clip.factor * float(np.mean(qb * qb)))
    events = 0
    for k in range(n_iter):
        if balanced:
            p = ops.mul(ib, ib) + ops.mul(qb, qb)
            x = p + ib - u1
            s = x + (p + qb - u2)
            ms = ops.mul(mu, s)
            mx = ops.mul(mu, x)
            my = ms - mx
            gi = ops.mul(ms, ib)
            gq = ops.mul(ms, qb)
            ib = ib - (gi + gi) - mx
            qb = qb - (gq + gq) - my
        else:
            i2, q2 = ops.mul(ib, ib), ops.mul(qb, qb)
            x = i2 + ops.mul(ratio, q2) + ib - u1
            y = ops.mul(i2, 1.0 / ratio) + q2 + qb - u2
            step_i = ops.mul(x, 2 * ib + 1) + ops.mul(y, ops.mul(2.0 / ratio, ib))
            step_q = ops.mul(x, ops.mul(2.0 * ratio, qb)) + ops.mul(y, 2 * qb + 1)
            ib = ib - ops.mul(mu, step_i)
            qb = qb - ops.mul(mu, step_q)
        if clip is not None:
            events += int(np.count_nonzero(np.abs(ib) > lim_i))
            events += int(np.count_nonzero(np.abs(qb) > lim_q))
        ib = np.clip(ib, -lim_i, lim_i)
        qb = np.clip(qb, -lim_q, lim_q)
        if callback is not None:
            callback(k + 1, 2 * a * ib, 2 * a2 * qb)
    return ReconstructionResult(2 * a * ib, 2 * a2 * qb, n_iter, ops.count, events, Method.GD)


def gd_error_norm(i_n, q_n, i_true, q_true) -> np.ndarray:
    """Per-sample normalized error ``2 sqrt((Ib_n - Ib)^2 + (Qb_n - Qb)^2)``."""
    i_n, q_n, i_true, q_true = (np.asarray(v, dtype=float) for v in (i_n, q_n, i_true, q_true))
    if not (i_n.shape == q_n.shape == i_true.shape == q_true.shape):
        raise ValueError("inputs must have equal lengths")
    return 2 * np.hypot(i_n - i_true, q_n - q_true)


def mult_count(method, n_iter: int | None = None) -> int:
    """Real multiplications per (I, Q) sample for a balanced receiver."""
    method = Method(method)
    if method is Method.RAW:
        return 0
    if method is Method.DFR:
        return 10
    if n_iter is None or n_iter < 1:
        raise ValueError(f"{method.value} needs n_iter >= 1")
    if method is Method.CIC:
        return 2 * n_iter + 2
    return 6 * n_iter + 2


def raw_passthrough(pair, a1: float, a2: float | None = None) -> ReconstructionResult:
    """Conventional receiver: scale out the LO, drop the DC, keep the SSBI."""
    a2 = a1 if a2 is None else a2
    _check_amplitudes(a1, a2)
    r1, r2 = _traces(pair)
    i_hat = (r1 - a1 * a1) / (2 * a1)
    q_hat = (r2 - a2 * a2) / (2 * a2)
    return ReconstructionResult(
        i_hat - np.mean(i_hat), q_hat - np.mean(q_hat), 0, 0, 0, Method.RAW
    )
