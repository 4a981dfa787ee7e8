"""
Configuration-driven simulation sweeps.

An :class:`ExperimentSpec` fixes a transmission setup and names one variable
to sweep. :func:`run_experiment` evaluates every (grid point, seed) pair,
one report row per reconstruction method, in a deterministic order that does
not depend on how many workers ran them.
"""

from __future__ import annotations

import dataclasses
import functools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from .calibration import (
    InversionBlock,
    align_training,
    calibrate,
    extract_responses,
    initial_state,
    training_capture,
    windowed_mse,
)
from .channel import ChannelConfig, add_ase, apply_cd
from .dynamics import bifurcation, bifurcation_delta
from .frontend import FrontEndConfig, detect, set_lospr
from .reconstruct import ClipSpec, ClipTarget, Method, cic, dfr, gd, raw_passthrough
from .rxdsp import MetricReport, empirical_dser, rx_chain, write_reports
from .waveform import QamFormat, gen_qam_symbols, rrc_shape

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "CalibrationSpec",
    "CalibrationOutcome",
    "BifurcationSpec",
    "run_bifurcation",
    "SWEEPABLE",
    "PRESETS",
    "default_clip_db",
    "spec_from_dict",
    "spec_to_dict",
    "load_config",
    "dump_config",
    "run_experiment",
    "run_point",
    "run_calibration",
    "worker_count",
]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


SWEEPABLE = {
    "lospr_db": float,
    "bwr": float,
    "n_iter": int,
    "clip_db": float,
    "osnr_db": float,
    "mu": float,
    "length_km": float,
    "format": str,
}


@dataclass(frozen=True)
class ExperimentSpec:
    """
    One sweep.

    ``clip_db`` is an absolute clip level in dB, ``"auto"`` for the
    per-method defaults of :func:`default_clip_db`, or ``None`` for no
    clipping. GD runs ``gd_iter`` steps when set, else ``n_iter``.
    ``lo_ratio`` is ``a2 / a1``. ``bwr=None`` and ``osnr_db=None`` mean
    unlimited bandwidth and no ASE.
    """

    name: str = "experiment"
    format: str = "QAM64"
    symbol_count: int = 2**15
    sps: int = 2
    rolloff: float = 0.01
    span: int = 256
    symbol_rate: float = 100e9
    length_km: float = 160.0
    dispersion: float = 17.0
    wavelength: float = 1550.0
    osnr_db: float | None = None
    osnr_ref_bw: float = 12.5e9
    lospr_db: float = 8.0
    lo_ratio: float = 1.0
    bwr: float | None = None
    method: tuple = ("DFR",)
    n_iter: int = 20
    gd_iter: int | None = None
    mu: float = 0.05
    clip_db: object = "auto"
    sweep_variable: str = "lospr_db"
    grid: tuple = (8.0,)
    seeds: tuple = (1,)
    output: str | None = None

    def __post_init__(self):
        _validate(self)


def _method(m) -> Method:
    return m if isinstance(m, Method) else Method(str(m).upper())


def _fail(name, msg):
    raise ConfigError(f"{name}: {msg}")


def _check_fields(s: ExperimentSpec) -> None:
    try:
        QamFormat.parse(s.format)
    except ValueError as exc:
        _fail("format", str(exc))
    if not isinstance(s.symbol_count, (int, np.integer)) or s.symbol_count < 2**12:
        _fail("symbol_count", "must be an integer >= 4096")
    if s.sps < 2:
        _fail("sps", "must be >= 2")
    if not 0 <= s.rolloff <= 1:
        _fail("rolloff", "must lie in [0, 1]")
    if s.span < 8:
        _fail("span", "must be >= 8")
    if s.symbol_rate <= 0:
        _fail("symbol_rate", "must be positive")
    if s.length_km < 0:
        _fail("length_km", "must be >= 0")
    if not math.isfinite(s.lospr_db):
        _fail("lospr_db", "must be finite")
    if s.lo_ratio <= 0:
        _fail("lo_ratio", "must be positive")
    if s.bwr is not None and not (0 < s.bwr <= s.sps):
        _fail("bwr", f"must lie in (0, sps={s.sps}]")
    if not s.method:
        _fail("method", "at least one method is required")
    for m in s.method:
        try:
            _method(m)
        except ValueError:
            _fail("method", f"unknown method {m!r}; choose from DFR, CIC, GD, RAW")
    if s.n_iter < 1:
        _fail("n_iter", "must be >= 1")
    if s.gd_iter is not None and s.gd_iter < 1:
        _fail("gd_iter", "must be >= 1")
    if not s.mu > 0:
        _fail("mu", "must be positive")
    clip = s.clip_db
    if not (clip is None or clip == "auto" or isinstance(clip, (int, float)) and math.isfinite(clip)):
        _fail("clip_db", "must be a finite number, 'auto' or null")


def _validate(s: ExperimentSpec) -> None:
    _check_fields(s)
    if s.sweep_variable not in SWEEPABLE:
        _fail("sweep_variable", f"must be one of {sorted(SWEEPABLE)}")
    if len(s.grid) == 0:
        _fail("grid", "must not be empty")
    if len(s.seeds) == 0:
        _fail("seeds", "must not be empty")
    for seed in s.seeds:
        if not isinstance(seed, (int, np.integer)) or seed < 0:
            _fail("seeds", f"seed {seed!r} is not a non-negative integer")
    for v in s.grid:
        try:
            _check_fields(_with_value(s, v))
        except ConfigError as exc:
            _fail("grid", f"value {v!r} is invalid for {s.sweep_variable} ({exc})")
        except (TypeError, ValueError) as exc:
            _fail("grid", f"value {v!r} is invalid for {s.sweep_variable}: {exc}")


def _with_value(s: ExperimentSpec, value) -> ExperimentSpec:
    """Copy of `s` with the sweep variable set to `value`, built without revalidating the grid."""
    kind = SWEEPABLE[s.sweep_variable]
    v = kind(value)
    values = {f.name: getattr(s, f.name) for f in dataclasses.fields(s)}
    values[s.sweep_variable] = v
    values["grid"] = (value,)
    obj = object.__new__(ExperimentSpec)
    for k, val in values.items():
        object.__setattr__(obj, k, val)
    return obj


def default_clip_db(method, lospr_db: float, bwr: float | None = None) -> float | None:
    """
    Default clip level for a method.

    CIC clips its SSBI estimate 1 dB below the LOSPR at full bandwidth and
    2 dB below at a bandwidth ratio of 1.2, interpolated linearly in between.
    GD clips each branch 4 dB above the LOSPR. DFR and RAW do not clip.
    """
    method = _method(method)
    if method is Method.CIC:
        b = 2.0 if bwr is None else min(max(bwr, 1.2), 2.0)
        return lospr_db - 2.0 + (b - 1.2) / 0.8
    if method is Method.GD:
        return lospr_db + 4.0
    return None


def _clip_for(spec: ExperimentSpec, method: Method):
    if method in (Method.DFR, Method.RAW) or spec.clip_db is None:
        return None
    if spec.clip_db == "auto":
        level = default_clip_db(method, spec.lospr_db, spec.bwr)
    else:
        level = float(spec.clip_db)
    target = ClipTarget.IQ_BRANCHES if method is Method.GD else ClipTarget.SSBI_ESTIMATE
    return ClipSpec(level, target)


@functools.lru_cache(maxsize=2)
def _transmit(fmt, n, seed, sps, rolloff, span, symbol_rate, channel, osnr_db, ref_bw):
    syms = gen_qam_symbols(fmt, n, seed)
    w = rrc_shape(syms, sps, rolloff, span, symbol_rate)
    w = apply_cd(w, channel)
    w = add_ase(w, osnr_db, ref_bw, seed=[seed, 1])
    return syms, w


def _gd_steps(p: ExperimentSpec) -> int:
    return p.n_iter if p.gd_iter is None else p.gd_iter


def run_point(spec: ExperimentSpec, grid_index: int, value, seed: int) -> list[MetricReport]:
    """Evaluate one grid point for one seed; one report per method."""
    p = _with_value(spec, value)
    channel = ChannelConfig(p.length_km, p.dispersion, p.wavelength)
    syms, w = _transmit(
        QamFormat.parse(p.format),
        int(p.symbol_count),
        int(seed),
        p.sps,
        p.rolloff,
        p.span,
        p.symbol_rate,
        channel,
        p.osnr_db,
        p.osnr_ref_bw,
    )
    cfg = set_lospr(w, p.lospr_db, FrontEndConfig(1.0, p.lo_ratio, bwr=p.bwr))
    pair = detect(w, cfg)
    a1, a2 = cfg.a1, cfg.a2
    dser = empirical_dser(w.samples, a1) if a1 == a2 else None
    out = []
    for m in p.method:
        method = _method(m)
        clip = _clip_for(p, method)
        if method is Method.DFR:
            rec = dfr(pair, a1, a2)
        elif method is Method.CIC:
            rec = cic(pair, a1, p.n_iter, clip, a2=a2)
        elif method is Method.GD:
            rec = gd(pair, a1, _gd_steps(p), p.mu, clip, a2=a2)
        else:
            rec = raw_passthrough(pair, a1, a2)
        rep = rx_chain(
            rec.i_hat, rec.q_hat, channel, syms,
            sps=p.sps, rolloff=p.rolloff, span=p.span, symbol_rate=p.symbol_rate,
        )
        iterative = method in (Method.CIC, Method.GD)
        rep.dser_empirical = dser
        rep.lospr_db = p.lospr_db
        rep.method = method.value
        rep.coords = dict(
            experiment=p.name,
            grid_index=grid_index,
            seed=int(seed),
            sweep_variable=p.sweep_variable,
            sweep_value=value,
            format=QamFormat.parse(p.format).value,
            bwr=p.bwr,
            osnr_db=p.osnr_db,
            n_iter=(_gd_steps(p) if method is Method.GD else p.n_iter) if iterative else None,
            clip_db=clip.level_db if clip is not None else None,
            mu=p.mu if method is Method.GD else None,
        )
        out.append(rep)
    return out


def worker_count(n_tasks: int) -> int:
    """Pool size: ``SER_DSP_THREADS`` if set, else the CPU count, capped by the task count."""
    env = os.environ.get("SER_DSP_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigError(f"SER_DSP_THREADS: not an integer: {env!r}") from None
        if cap < 1:
            raise ConfigError("SER_DSP_THREADS: must be >= 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def _task(args):
    spec, gi, value, seed = args
    return run_point(spec, gi, value, seed)


def run_experiment(spec: ExperimentSpec, output=None, progress=None) -> list[MetricReport]:
    """
    Run every grid point for every seed.

    Rows are ordered by grid index, then seed, then method order. The CSV
    is written to `output` (or ``spec.output``) when given. `progress`, if
    set, is called with each point's reports as they are collected.
    """
    tasks = [(spec, gi, v, s) for gi, v in enumerate(spec.grid) for s in spec.seeds]
    n = worker_count(len(tasks))
    rows: list[MetricReport] = []
    if n == 1:
        results = map(_task, tasks)
        for r in results:
            rows += r
            if progress:
                progress(r)
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            for r in pool.map(_task, tasks):
                rows += r
                if progress:
                    progress(r)
    path = output if output is not None else spec.output
    if path is not None:
        write_reports(path, rows)
    return rows


# -- configuration files ------------------------------------------------------

_TUPLE_FIELDS = ("method", "grid", "seeds")


def spec_from_dict(d: dict, cls=None):
    """Build a spec from a flat mapping; unknown keys are errors."""
    if not isinstance(d, dict):
        raise ConfigError("config: top level must be a mapping")
    if cls is None:
        kinds = {"sweep": ExperimentSpec, "calibration": CalibrationSpec, "bifurcation": BifurcationSpec}
        kind = d.get("kind", "sweep")
        if kind not in kinds:
            raise ConfigError(f"kind: must be one of {sorted(kinds)}")
        cls = kinds[kind]
    d = {k: v for k, v in d.items() if k != "kind"}
    names = {f.name for f in dataclasses.fields(cls)}
    for k in d:
        if k not in names:
            raise ConfigError(f"{k}: unknown key")
    kw = {}
    for k, v in d.items():
        if k in _TUPLE_FIELDS and cls is ExperimentSpec:
            v = tuple(v) if isinstance(v, (list, tuple)) else (v,)
        if isinstance(v, str) and v.lower() in ("none", "null", "inf") and k in (
            "osnr_db", "bwr", "clip_db", "output", "gd_iter",
        ):
            v = None
        kw[k] = _coerce(cls, k, v)
    return cls(**kw)


def _coerce(cls, name, v):
    ftype = {f.name: f.type for f in dataclasses.fields(cls)}[name]
    if v is None:
        return None
    try:
        if ftype in ("int", "int | None"):
            if isinstance(v, float) and not v.is_integer():
                raise ValueError("not an integer")
            return int(v)
        if ftype in ("float", "float | None"):
            return float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None
    return v


def spec_to_dict(spec) -> dict:
    """Plain mapping of every field with defaults resolved."""
    d = {"kind": _KIND[type(spec)]}
    for f in dataclasses.fields(spec):
        v = getattr(spec, f.name)
        if isinstance(v, tuple):
            v = [_plain(x) for x in v]
        else:
            v = _plain(v)
        d[f.name] = v
    return d


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, enum_types()):
        return v.value
    return v


def enum_types():
    return (InversionBlock, Method, QamFormat)


def load_config(path):
    with open(path) as fh:
        try:
            d = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config: not valid YAML: {exc}") from None
    if d is None:
        d = {}
    return spec_from_dict(d)


def dump_config(spec, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(spec_to_dict(spec), fh, sort_keys=False)


# -- calibration runs ---------------------------------------------------------


@dataclass(frozen=True)
class CalibrationSpec:
    """Simulated calibration capture plus LMS settings."""

    name: str = "calibration"
    format: str = "QAM16"
    n_symbols: int = 60_000
    seed: int = 0
    lospr_db: float = 13.0
    f3db_tx: float = 35e9
    f3db_rx: float = 35e9
    order: int = 2
    symbol_rate: float = 100e9
    rolloff: float = 0.01
    taps: int = 33
    mu1: float = 1e-3
    mu2: float = 1e-3
    inversion: str = "DFR_BLOCK"
    n_samples: int = 100_000
    adapt_window: int = 4096
    mse_window: int = 1024
    n_freq: int = 101

    def __post_init__(self):
        try:
            QamFormat.parse(self.format)
        except ValueError as exc:
            _fail("format", str(exc))
        try:
            InversionBlock(self.inversion)
        except ValueError:
            _fail("inversion", "must be DFR_BLOCK or IC1_BLOCK")
        if self.taps < 1 or self.taps % 2 == 0:
            _fail("taps", "must be odd and positive")
        if not (self.mu1 > 0 and self.mu2 > 0):
            _fail("mu1", "step sizes must be positive")
        if self.n_samples < self.mse_window:
            _fail("n_samples", "must cover at least one MSE window")
        if 2 * self.n_symbols < self.n_samples + 4 * self.taps:
            _fail("n_symbols", "too few symbols for the requested n_samples")
        if self.n_freq < 2:
            _fail("n_freq", "must be >= 2")


@dataclass
class CalibrationOutcome:
    state: object
    responses: object
    mse_db: np.ndarray
    lag: int
    truth_rx: np.ndarray = field(repr=False, default=None)
    truth_tx: np.ndarray = field(repr=False, default=None)


def run_calibration(spec: CalibrationSpec) -> CalibrationOutcome:
    """Simulate the capture, align, train, and extract responses up to half the symbol rate."""
    cap = training_capture(
        spec.n_symbols,
        spec.seed,
        fmt=spec.format,
        lospr_db=spec.lospr_db,
        f3db_tx=spec.f3db_tx,
        f3db_rx=spec.f3db_rx,
        order=spec.order,
        symbol_rate=spec.symbol_rate,
        rolloff=spec.rolloff,
    )
    lag = align_training(cap.r1, cap.training, max_lag=4 * spec.taps)
    training = np.roll(np.asarray(cap.training.samples), lag)
    st0 = initial_state(cap.a, spec.taps, spec.mu1, spec.mu2, InversionBlock(spec.inversion))
    st = calibrate(
        cap.r1, cap.r2, training, st0,
        n_samples=spec.n_samples, adapt_window=spec.adapt_window or None,
    )
    freqs = np.linspace(0, spec.symbol_rate / 2, spec.n_freq)
    est = extract_responses(st, freqs, cap.sample_rate)
    return CalibrationOutcome(
        st, est, windowed_mse(st, spec.mse_window), lag, cap.true_rx(freqs), cap.true_tx(freqs)
    )


@dataclass(frozen=True)
class BifurcationSpec:
    """Grid and sampling for a bifurcation table; ``coords`` is ``"b"`` or ``"delta"``."""

    name: str = "bifurcation"
    coords: str = "b"
    x_min: float = -0.25
    x_max: float = 2.5
    n_points: int = 500
    samples: int = 200
    n_iter: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.coords not in ("b", "delta"):
            _fail("coords", "must be 'b' or 'delta'")
        if self.coords == "b" and self.x_min < -0.25:
            _fail("x_min", "b must be >= -1/4")
        if self.x_max < self.x_min:
            _fail("x_max", "must be >= x_min")
        if self.n_points < 1:
            _fail("n_points", "must be >= 1")
        if self.samples < 1:
            _fail("samples", "must be >= 1")
        if self.n_iter < 100:
            _fail("n_iter", "must be >= 100")


def run_bifurcation(spec: BifurcationSpec):
    """Rows ``(x, terminal_value, multiplicity)`` and the matching CSV header."""
    if spec.coords == "b":
        rows = bifurcation(spec.x_min, spec.x_max, spec.n_points, spec.samples, spec.n_iter, spec.seed)
        return rows, ("b", "terminal_value", "multiplicity")
    rows = bifurcation_delta(spec.x_min, spec.x_max, spec.n_points, spec.samples, spec.n_iter, spec.seed)
    return rows, ("s", "terminal_error", "multiplicity")


_KIND = {ExperimentSpec: "sweep", CalibrationSpec: "calibration", BifurcationSpec: "bifurcation"}


# -- figure presets -----------------------------------------------------------

PRESETS = {
    "fig3a": ExperimentSpec(
        name="fig3a", method=("RAW",), sweep_variable="lospr_db",
        grid=(6.0, 8.0, 10.0, 12.0, 14.0),
    ),
    "fig3b": ExperimentSpec(
        name="fig3b", method=("RAW",), lospr_db=14.0, symbol_count=2**17,
        sweep_variable="osnr_db", grid=tuple(float(x) for x in range(14, 42, 2)),
    ),
    "fig6c": ExperimentSpec(
        name="fig6c", method=("DFR",), sweep_variable="lospr_db",
        grid=tuple(float(x) for x in range(5, 12)),
    ),
    "fig9a": ExperimentSpec(
        name="fig9a", method=("CIC",), n_iter=12, sweep_variable="clip_db",
        grid=tuple(float(x) for x in range(3, 13)),
    ),
    "fig9b": ExperimentSpec(
        name="fig9b", method=("CIC",), sweep_variable="n_iter",
        grid=tuple(range(1, 21)),
    ),
    "fig10b": ExperimentSpec(
        name="fig10b", method=("GD",), clip_db=12.0, sweep_variable="n_iter",
        grid=tuple(range(20, 180, 20)),
    ),
    "fig11b": ExperimentSpec(
        name="fig11b", method=("DFR", "CIC", "GD"), n_iter=20, gd_iter=120, bwr=2.0,
        sweep_variable="lospr_db", grid=tuple(float(x) for x in range(6, 15, 2)),
    ),
    "fig11c": ExperimentSpec(
        name="fig11c", method=("DFR", "CIC", "GD"), n_iter=20, gd_iter=120, bwr=2.0,
        sweep_variable="bwr", grid=(1.0, 1.2, 1.4, 1.6, 1.8, 2.0),
    ),
}
