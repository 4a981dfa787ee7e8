"""
Command-line entry point.

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
failures while running.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import yaml

from . import dynamics as dyn
from .calibration import write_cost_trace, write_responses, write_taps
from .experiments import (
    PRESETS,
    BifurcationSpec,
    CalibrationSpec,
    ConfigError,
    ExperimentSpec,
    dump_config,
    load_config,
    run_bifurcation,
    run_calibration,
    run_experiment,
    spec_from_dict,
    spec_to_dict,
)
from .selfcheck import run_selfcheck

log = logging.getLogger("ser_dsp")

ECHO_NAME = "effective_config.yaml"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ser-dsp", description="Single-ended coherent receiver DSP simulations.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more output")
    p.add_argument("-q", "--quiet", action="store_true", help="errors only")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sw = sub.add_parser("sweep", help="run an experiment sweep")
    src = sw.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="YAML experiment file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in figure setup")
    sw.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config key (YAML value syntax)")
    _common(sw)

    bf = sub.add_parser("bifurcation", help="terminal-value table of the error map")
    bf.add_argument("--config", type=Path, help="YAML bifurcation file")
    bf.add_argument("--bmin", type=float, help="smallest grid value")
    bf.add_argument("--bmax", type=float, help="largest grid value")
    bf.add_argument("--nb", type=int, help="grid points")
    bf.add_argument("--samples", type=int, help="initial values per grid point")
    bf.add_argument("--niter", type=int, help="iterations per trajectory")
    bf.add_argument("--coords", choices=("b", "delta"), help="map parameter or loop error")
    _common(bf)

    cb = sub.add_parser("calibrate", help="simulate and run transmitter/receiver calibration")
    cb.add_argument("--config", type=Path, help="YAML calibration file")
    cb.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    _common(cb)

    cl = sub.add_parser("classify", help="predicted and simulated behaviour of one sample")
    cl.add_argument("--s", type=float, required=True, help="Ib + Qb")
    cl.add_argument("--delta0", type=float, required=True, help="initial error")
    cl.add_argument("--period-two-limit", type=float, default=dyn.PERIOD_TWO_LIMIT)

    sub.add_parser("selfcheck", help="run the built-in invariant checks")
    return p


def _common(p):
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, help="override the seed(s)")


def _prepare_out(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"--out: cannot create {path}: {exc}") from None
    if not os.access(path, os.W_OK):
        raise ConfigError(f"--out: {path} is not writable")
    return path


def _overrides(d: dict, items) -> dict:
    d = dict(d)
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set: expected KEY=VALUE, got {item!r}")
        d[key.strip()] = yaml.safe_load(raw)
    return d


def _load(path, expected):
    if not path.exists():
        raise ConfigError(f"--config: no such file {path}")
    spec = load_config(path)
    if not isinstance(spec, expected):
        kinds = {ExperimentSpec: "sweep", CalibrationSpec: "calibration", BifurcationSpec: "bifurcation"}
        raise ConfigError(f"kind: {path} is not a {kinds[expected]} config")
    return spec


def _cmd_sweep(args) -> int:
    spec = PRESETS[args.preset] if args.preset else _load(args.config, ExperimentSpec)
    d = _overrides(spec_to_dict(spec), args.set)
    if args.seed is not None:
        d["seeds"] = [args.seed]
    spec = spec_from_dict(d)
    out = _prepare_out(args.out)
    csv_name = spec.output or f"{spec.name}.csv"
    if Path(csv_name).name != csv_name:
        raise ConfigError("output: must be a bare file name (it is placed under --out)")
    dump_config(spec, out / ECHO_NAME)

    def show(reports):
        for r in reports:
            c = r.coords
            log.info(
                "grid %d %s=%s seed=%d %s snr=%.3f dB ber=%.4g ser=%.4g",
                c["grid_index"], c["sweep_variable"], c["sweep_value"], c["seed"],
                r.method, r.effective_snr_db, r.ber, r.symbol_error_rate,
            )

    run_experiment(spec, out / csv_name, progress=show)
    log.info("wrote %s", out / csv_name)
    return 0


def _cmd_bifurcation(args) -> int:
    if args.config is not None:
        spec = _load(args.config, BifurcationSpec)
        d = spec_to_dict(spec)
    else:
        d = spec_to_dict(BifurcationSpec())
    flags = {
        "x_min": args.bmin, "x_max": args.bmax, "n_points": args.nb,
        "samples": args.samples, "n_iter": args.niter, "coords": args.coords, "seed": args.seed,
    }
    d.update({k: v for k, v in flags.items() if v is not None})
    spec = spec_from_dict(d)
    out = _prepare_out(args.out)
    dump_config(spec, out / ECHO_NAME)
    rows, header = run_bifurcation(spec)
    path = out / f"{spec.name}.csv"
    dyn.write_bifurcation(path, rows, header)
    log.info("%d rows over %d grid points -> %s", len(rows), spec.n_points, path)
    return 0


def _cmd_calibrate(args) -> int:
    spec = _load(args.config, CalibrationSpec) if args.config else CalibrationSpec()
    d = _overrides(spec_to_dict(spec), args.set)
    if args.seed is not None:
        d["seed"] = args.seed
    spec = spec_from_dict(d)
    out = _prepare_out(args.out)
    dump_config(spec, out / ECHO_NAME)
    res = run_calibration(spec)
    write_taps(out / f"{spec.name}_taps.csv", res.state)
    write_cost_trace(out / f"{spec.name}_cost.csv", res.state, spec.mse_window)
    write_responses(out / f"{spec.name}_responses.csv", res.responses)
    log.info(
        "%s: lag %d, final windowed MSE %.2f dB (best %.2f dB) after %d samples",
        spec.inversion, res.lag, res.mse_db[-1], res.mse_db.min(), spec.n_samples,
    )
    return 0


def _cmd_classify(args) -> int:
    pred = dyn.classify(args.s, args.delta0, args.period_two_limit)
    seen = dyn.observe(args.s, args.delta0)
    e0, b, a_abs = dyn.map_parameters(args.s, args.delta0)
    print(f"e0={float(e0):.12g} b={float(b):.12g} |alpha|={float(a_abs):.12g}")
    print(f"predicted: {pred}")
    print(f"simulated: {seen}")
    return 0


def _cmd_selfcheck(args) -> int:
    results = run_selfcheck()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 2


COMMANDS = {
    "sweep": _cmd_sweep,
    "bifurcation": _cmd_bifurcation,
    "calibrate": _cmd_calibrate,
    "classify": _cmd_classify,
    "selfcheck": _cmd_selfcheck,
}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose else logging.INFO)
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stdout, force=True)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
