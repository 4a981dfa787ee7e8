"""
Error dynamics of iterative SSBI cancellation.

Without clipping, the per-sample estimation error ``d(n)`` of the
cancellation loop obeys ``d(n+1) = -2 d(n) (d(n) + s)`` with ``s = Ib + Qb``.
The substitution ``e = 2 d + s`` turns this into the quadratic map::

    e(n+1) = -e(n)**2 + b,    b = s**2 + s

whose fixed points, escape region and period-doubling cascade decide
whether the loop removes the interference, settles on a wrong value,
oscillates, or runs away to minus infinity.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConvergenceClass",
    "Classification",
    "MapInstance",
    "SENTINEL",
    "iterate_map",
    "iterate_error",
    "fixed_points",
    "map_parameters",
    "classify",
    "observe",
    "observe_many",
    "terminal_set",
    "bifurcation",
    "bifurcation_delta",
    "write_bifurcation",
    "PERIOD_TWO_LIMIT",
]

# Values whose magnitude passes this are replaced by SENTINEL; once there a
# trajectory can only grow more negative, so nothing is lost.
OVERFLOW = 1e100
SENTINEL = -math.inf

# Upper end of the period-2 window as read off the bifurcation diagram. The
# period-4 bifurcation is really at b = 5/4, so b in (1.25, 1.3] is labelled
# periodic although trajectories there visit four values.
PERIOD_TWO_LIMIT = 1.3

TAIL = 64
DEDUP_TOL = 1e-6


class ConvergenceClass(str, enum.Enum):
    DIVERGES = "DivergesToMinusInfinity"
    ZERO_ERROR = "ConvergesToZeroError"
    OFFSET = "ConvergesToOffset"
    PERIODIC = "PeriodicOscillation"
    CHAOTIC = "ChaoticOrHigherPeriod"
    UNBOUNDED_OR_BOUNDED = "UnboundedOrBounded"


@dataclass(frozen=True)
class Classification:
    """A convergence class and, for ``OFFSET``, the limiting error value."""

    kind: ConvergenceClass
    offset: float | None = None

    def __str__(self) -> str:
        if self.offset is None:
            return self.kind.value
        return f"{self.kind.value}({self.offset:.12g})"


@dataclass(frozen=True)
class MapInstance:
    b: float
    e0: float
    s: float | None = None

    @classmethod
    def from_error(cls, s: float, delta0: float) -> "MapInstance":
        return cls(s * s + s, 2 * delta0 + s, s)


def _step(e):
    with np.errstate(over="ignore", invalid="ignore"):
        out = -e * e
    return out


def iterate_map(b: float, e0: float, n: int) -> np.ndarray:
    """
    Trajectory ``[e(0), ..., e(n)]`` of ``e -> -e**2 + b``.

    Once ``|e|`` exceeds 1e100 the remaining entries are :data:`SENTINEL`.
    `b` and `e0` may be arrays of equal shape; the step index is then the
    last axis of the result.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    e = np.asarray(e0, dtype=float)
    b = np.broadcast_to(np.asarray(b, dtype=float), e.shape)
    out = np.empty(e.shape + (n + 1,))
    e = np.where(np.abs(e) > OVERFLOW, SENTINEL, e)
    out[..., 0] = e
    for k in range(1, n + 1):
        e = _step(e) + b
        e = np.where(np.abs(e) > OVERFLOW, SENTINEL, e)
        out[..., k] = e
    return out


def iterate_error(s: float, delta0: float, n: int) -> np.ndarray:
    """Cancellation-loop error ``d(n+1) = -2 d(n) (d(n) + s)`` iterated directly."""
    if n < 0:
        raise ValueError("n must be >= 0")
    d = np.asarray(delta0, dtype=float)
    s = np.broadcast_to(np.asarray(s, dtype=float), d.shape)
    out = np.empty(d.shape + (n + 1,))
    out[..., 0] = d
    for k in range(1, n + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            d = -2 * d * (d + s)
        d = np.where(np.abs(d) > OVERFLOW, SENTINEL, d)
        out[..., k] = d
    return out


def fixed_points(b: float) -> tuple[float, float]:
    """Fixed points ``(alpha, beta)`` of the map; alpha repels, beta may attract."""
    if b < -0.25:
        raise ValueError(f"b = {b} < -1/4 has complex fixed points")
    r = math.sqrt(1 + 4 * b) / 2
    return -0.5 - r, -0.5 + r


def map_parameters(s, delta0):
    """``(e0, b, |alpha|)`` for a sample with ``Ib + Qb = s`` and initial error `delta0`."""
    s = np.asarray(s, dtype=float)
    e0 = 2 * np.asarray(delta0, dtype=float) + s
    b = s * s + s
    return e0, b, 0.5 + np.abs(s + 0.5)


def classify(s: float, delta0: float, period_two_limit: float = PERIOD_TWO_LIMIT) -> Classification:
    """
    Predicted long-run behaviour of the cancellation error for one sample.

    Parameters
    ----------
    s : float
        ``Ib + Qb``, the normalized in-phase plus quadrature field.
    delta0 : float
        Error of the initial estimate.
    period_two_limit : float
        Largest ``b`` still labelled as a period-2 oscillation.

    Notes
    -----
    Escape happens when ``|e0| > |alpha|``. On the boundary itself the
    trajectory lands on alpha and stays there. Inside, ``b <= 3/4`` converges
    to beta, which is the true field for ``|s| <= 1/2`` and an offset
    ``-(s + 1/2)`` otherwise.
    """
    e0, b, a_abs = (float(v) for v in map_parameters(s, delta0))
    s = float(s)
    offset = -(s + 0.5)
    if abs(e0) > a_abs:
        return Classification(ConvergenceClass.DIVERGES)
    if abs(e0) == a_abs:
        if s <= -0.5:
            return Classification(ConvergenceClass.ZERO_ERROR)
        return Classification(ConvergenceClass.OFFSET, offset)
    if delta0 == 0 and s >= -0.5:
        return Classification(ConvergenceClass.ZERO_ERROR)
    if delta0 == offset and s < -0.5:
        return Classification(ConvergenceClass.OFFSET, offset)
    if b <= 0.75:
        if abs(s) <= 0.5:
            return Classification(ConvergenceClass.ZERO_ERROR)
        return Classification(ConvergenceClass.OFFSET, offset)
    if b <= period_two_limit:
        return Classification(ConvergenceClass.PERIODIC)
    if b <= 2:
        return Classification(ConvergenceClass.CHAOTIC)
    return Classification(ConvergenceClass.UNBOUNDED_OR_BOUNDED)


def _dedup(values: np.ndarray, tol: float = DEDUP_TOL) -> tuple[np.ndarray, np.ndarray]:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        return v, np.zeros(0, dtype=np.int64)
    starts = np.concatenate(([0], np.nonzero(np.diff(v) > tol)[0] + 1))
    counts = np.diff(np.concatenate((starts, [v.size])))
    return v[starts], counts


def terminal_set(b: float, e0: float, n_iter: int = 1000, tail: int = TAIL, tol: float = DEDUP_TOL):
    """
    Distinct values among the last `tail` iterates, or ``None`` on escape.

    Returns the sorted values and how many of the tail iterates fell on each.
    """
    traj = iterate_map(b, e0, n_iter)[-tail:]
    if not np.all(np.isfinite(traj)):
        return None
    return _dedup(traj, tol)


def observe(s: float, delta0: float, n_iter: int = 1000, tol: float = DEDUP_TOL) -> Classification:
    """
    Behaviour class measured by iterating the map `n_iter` steps.

    The last 64 iterates are merged within `tol`: one value is a limit
    (zero error or an offset), two a period-2 cycle, more than two a higher
    period or chaos. Escape to the sentinel means divergence.
    """
    return observe_many([s], [delta0], n_iter, tol)[0]


def observe_many(s, delta0, n_iter: int = 1000, tol: float = DEDUP_TOL) -> list[Classification]:
    """Vectorized :func:`observe` over arrays of samples."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    e0, b, _ = map_parameters(s, delta0)
    tails = iterate_map(b, e0, n_iter)[..., -TAIL:]
    out = []
    for sk, t in zip(s, tails):
        if not np.all(np.isfinite(t)):
            out.append(Classification(ConvergenceClass.DIVERGES))
            continue
        values, _ = _dedup(t, tol)
        if values.size == 1:
            d = (values[0] - sk) / 2
            if abs(d) <= 1e-6:
                out.append(Classification(ConvergenceClass.ZERO_ERROR))
            else:
                out.append(Classification(ConvergenceClass.OFFSET, float(d)))
        elif values.size == 2:
            out.append(Classification(ConvergenceClass.PERIODIC))
        else:
            out.append(Classification(ConvergenceClass.CHAOTIC))
    return out


def _terminal_rows(x, b, e0, n_iter, to_output):
    if n_iter < 100:
        raise ValueError("n_iter must be >= 100")
    traj = iterate_map(b, e0, n_iter)[:, -TAIL:]
    keep = np.all(np.isfinite(traj), axis=1)
    values, counts = _dedup(to_output(traj[keep]))
    return [(x, float(v), int(c)) for v, c in zip(values, counts)]


def _draw_inside(rng, b: float, n: int) -> np.ndarray:
    alpha, _ = fixed_points(b)
    # open interval (alpha, -alpha)
    lo, hi = alpha, -alpha
    e0 = rng.uniform(lo, hi, size=n)
    return np.where(e0 == lo, 0.0, e0)


def bifurcation(
    b_min: float, b_max: float, n_b: int, samples_per_b: int, n_iter: int = 1000, seed: int = 0
) -> list[tuple[float, float, int]]:
    """
    Terminal values of the map over a grid of `b`.

    For each grid point, `samples_per_b` initial values are drawn uniformly
    inside the confinement interval ``(alpha, -alpha)`` and iterated
    `n_iter` steps. The last 64 iterates of every non-escaping trajectory are
    pooled and merged within 1e-6.

    Returns
    -------
    list of (b, terminal_value, multiplicity)
        Multiplicity counts pooled tail iterates on each value.
    """
    if b_min < -0.25:
        raise ValueError("b_min must be >= -1/4")
    if n_b < 1 or samples_per_b < 1:
        raise ValueError("n_b and samples_per_b must be positive")
    rng = np.random.default_rng(seed)
    rows = []
    for b in np.linspace(b_min, b_max, n_b):
        e0 = _draw_inside(rng, float(b), samples_per_b)
        rows += _terminal_rows(float(b), np.full(samples_per_b, b), e0, n_iter, lambda t: t)
    return rows


def bifurcation_delta(
    s_min: float, s_max: float, n_s: int, samples_per_s: int, n_iter: int = 1000, seed: int = 0
) -> list[tuple[float, float, int]]:
    """
    Same diagram in loop-error coordinates: terminal ``d`` versus ``s = Ib + Qb``.

    Rows are ``(s, terminal_error, multiplicity)`` with ``d = (e - s) / 2``.
    """
    if n_s < 1 or samples_per_s < 1:
        raise ValueError("n_s and samples_per_s must be positive")
    rng = np.random.default_rng(seed)
    rows = []
    for s in np.linspace(s_min, s_max, n_s):
        b = float(s * s + s)
        e0 = _draw_inside(rng, b, samples_per_s)
        rows += _terminal_rows(
            float(s), np.full(samples_per_s, b), e0, n_iter, lambda t, s=s: (t - s) / 2
        )
    return rows


def write_bifurcation(path, rows, header=("b", "terminal_value", "multiplicity")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, v, c in rows:
            w.writerow([format(x, ".12g"), format(v, ".12g"), int(c)])
