"""Command-line front end.

Exit codes: 0 success, 2 configuration/usage/malformed input, 3 model error.
Every command reads an optional ``--config`` file; ``--set key=value``
and ``--seed`` override it.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import tables
from .analysis_cavity import scan_curve
from .config import RunConfig, check_seed, load_config, parse_config
from .dsp import CHANNELS, BasebandTrace, criteria_samples, demodulate, design_lowpass, synthesize_baseband
from .errors import MalformedInputError, ModelError, ParameterError
from .fit import DEFAULT_BOUNDS, FREE_NAMES, fit_parameters, predict_sigma_scan
from .opo import spectral_covariance
from .quadratures import SpectralCovariance, criteria_from_moments, estimate_moments

EXIT_OK, EXIT_USAGE, EXIT_MODEL = 0, 2, 3


class _UsageError(ParameterError):
    pass


def _seed(text: str) -> int:
    try:
        return check_seed(int(text, 0))
    except (ValueError, ParameterError):
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text!r}")


def _config(args) -> RunConfig:
    overrides = parse_config("\n".join(args.set or []), "--set")
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "output", None) is not None:
        overrides["output"] = args.output
    return load_config(args.config, overrides)


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.output:
        tables.atomic_write(cfg.output, text)
    else:
        sys.stdout.write(text)


def _grid(lo: float, hi: float, n: int, name: str) -> np.ndarray:
    if n < 2:
        raise _UsageError(f"{name}: n_points={n} must be >= 2")
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise _UsageError(f"{name}: need finite min < max, got [{lo}, {hi}]")
    return np.linspace(lo, hi, n)


def cmd_scan(args) -> int:
    cfg = _config(args)
    grid = _grid(args.delta_min, args.delta_max, args.n_points, "scan")
    cov = spectral_covariance(cfg.opo, cfg.cavity.analysis_freq)
    _emit(tables.scan_to_csv(scan_curve(cov, grid, cfg.cavity)), cfg)
    return EXIT_OK


def cmd_fig3(args) -> int:
    cfg = _config(args)
    grid = _grid(args.sigma_min, args.sigma_max, args.n_points, "fig3")
    if grid[0] <= 1:
        raise _UsageError(f"fig3: sigma_min={args.sigma_min} must be > 1")
    _emit(tables.sigma_scan_to_csv(predict_sigma_scan(cfg.opo, grid, cfg.cavity.analysis_freq)), cfg)
    return EXIT_OK


def _target(cfg: RunConfig, vacuum: bool):
    if vacuum:
        return SpectralCovariance.identity(cfg.nu)
    return spectral_covariance(cfg.opo, cfg.nu)


def cmd_traces(args) -> int:
    cfg = _config(args)
    target = _target(cfg, args.vacuum)
    if not args.rf:
        trace = synthesize_baseband(target, cfg.n_samples, cfg.sample_rate, seed=cfg.seed,
                                    window=cfg.window, calibration=cfg.calibration, nu=cfg.nu,
                                    block_size=cfg.block_size)
        _emit(tables.trace_to_csv(trace), cfg)
        return EXIT_OK
    # white photocurrent noise at the RF rate; unit two-sided density per shot-noise unit
    lp = design_lowpass(cfg.rf_rate, cfg.sample_rate)
    startup = -(-(len(lp.taps) - 1) // lp.decimation)  # outputs dropped by demodulate
    n_rf = (cfg.n_samples + startup) * lp.decimation
    base = synthesize_baseband(target, n_rf, cfg.rf_rate, seed=cfg.seed, window=cfg.window,
                               calibration=cfg.calibration * cfg.rf_rate, nu=cfg.nu,
                               block_size=min(cfg.block_size, n_rf))
    meta = {"rf_rate": tables.fmt(cfg.rf_rate), "nu": tables.fmt(cfg.nu), "seed": str(cfg.seed),
            "calibration": tables.fmt(cfg.calibration), "quadratures": ",".join(base.quadratures)}
    rows = zip(range(n_rf), *(base.channels[c] for c in CHANNELS))
    _emit(tables.format_csv(("index",) + CHANNELS, rows, meta, int_columns=("index",)), cfg)
    return EXIT_OK


def cmd_demod(args) -> int:
    cfg = _config(args)
    meta, cols, data = tables._read(args.input, ("index",) + CHANNELS)
    if "rf_rate" not in meta:
        raise MalformedInputError("header lacks rf_rate (not an RF trace?)", 1, args.input)
    try:
        rf_rate = float(meta["rf_rate"])
        nu = float(meta.get("nu", cfg.nu))
        cal = float(meta.get("calibration", cfg.calibration))
    except ValueError as exc:
        raise MalformedInputError(f"bad header value ({exc})", 1, args.input) from None
    quads = tuple(meta.get("quadratures", "p0,p1,p2").split(","))
    lp = design_lowpass(rf_rate, cfg.sample_rate)
    chans = {c: demodulate(data[:, cols.index(c)], rf_rate, nu, args.lo_phase, cfg.sample_rate,
                           lowpass=lp) for c in CHANNELS}
    seed = meta.get("seed")
    trace = BasebandTrace(cfg.sample_rate, chans, nu=nu, seed=int(seed) if seed else None,
                          calibration=cal, quadratures=quads)
    _emit(tables.trace_to_csv(trace), cfg)
    return EXIT_OK


def cmd_criteria(args) -> int:
    cfg = _config(args)
    if args.moments:
        kind, payload = tables.read_moments(args.moments)
        moments = estimate_moments(payload) if kind == "samples" else payload
    else:
        amp, phase = (tables.read_trace(p) for p in args.traces)
        moments = estimate_moments(criteria_samples(amp, phase, cfg.block_size))
    report = criteria_from_moments(moments)
    sys.stdout.write("\n".join(report.lines()) + "\n")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _config(args)
    data = tables.read_sigma_scan(args.data)
    free = tuple(args.free.split(",")) if args.free else FREE_NAMES
    init = tuple(args.init) if args.init else (0.0, 0.0, 10.0)
    result = fit_parameters(data, cfg.opo, init=init, bounds=DEFAULT_BOUNDS, free=free,
                            max_iter=args.max_iter, omega=cfg.cavity.analysis_freq)
    _emit(result.as_text(), cfg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tricolor", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, stochastic=False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("-o", "--output", help="output file (default: stdout)")
        if stochastic:
            p.add_argument("--seed", type=_seed, help="unsigned 64-bit RNG seed")
        p.set_defaults(func=func)
        return p

    p = add("scan", cmd_scan, "noise versus analysis-cavity detuning")
    p.add_argument("--delta-min", type=float, default=-3.0)
    p.add_argument("--delta-max", type=float, default=3.0)
    p.add_argument("--n-points", type=int, default=121)

    p = add("fig3", cmd_fig3, "phase-sum noise and pump correction versus sigma")
    p.add_argument("--sigma-min", type=float, default=1.05)
    p.add_argument("--sigma-max", type=float, default=1.6)
    p.add_argument("--n-points", type=int, default=12)

    p = add("traces", cmd_traces, "synthesize photocurrent traces", stochastic=True)
    p.add_argument("--vacuum", action="store_true", help="shot-noise-only target")
    p.add_argument("--rf", action="store_true", help="emit RF-rate photocurrents instead of baseband")

    p = add("demod", cmd_demod, "demodulate an RF trace CSV to baseband")
    p.add_argument("input", help="RF trace CSV (from 'traces --rf')")
    p.add_argument("--lo-phase", type=float, default=0.0)

    p = add("criteria", cmd_criteria, "evaluate the correlation criteria")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--moments", help="moments CSV (samples or one summary row)")
    g.add_argument("--traces", nargs=2, metavar=("AMPLITUDE", "PHASE"),
                   help="baseband traces from the amplitude and phase windows")

    p = add("fit", cmd_fit, "fit detunings and excess pump noise to a sigma sweep")
    p.add_argument("data", help="sigma-sweep CSV")
    p.add_argument("--free", help=f"comma-separated subset of {','.join(FREE_NAMES)}")
    p.add_argument("--init", type=float, nargs=3, metavar=FREE_NAMES)
    p.add_argument("--max-iter", type=int, default=2000)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
