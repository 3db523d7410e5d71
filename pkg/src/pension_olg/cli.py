"""Command-line entry point: ``pension-olg <subcommand> [options]``.

Subcommands:

  print-defaults   calibrated parameter values as a configuration file
  calibrate        technology and leisure-utility estimates from annual data
  solve-ss         baseline and settled steady states
  transition       transition paths, CSVs, charts and manifest
  report           redraw charts and manifest from CSVs already in --out

Exit status is 0 on success, 1 on a solver failure and 2 on bad input.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .calibration import (SeriesError, bundled_series, calibrate_technology, ellipse_sup_gap,
                          fit_ellipse, fitted_output, implied_interest, ingest_series)
from .errors import ConfigError, ConvergenceError, NonFiniteError, ScenarioInfeasible
from .params import (INSTRUMENTS, REFORM_INSTRUMENTS, ModelParams, ScenarioSpec,
                     default_config_text, load_config, period_to_year)
from .reporting import (RunManifest, emit_charts, fmt_number, write_aggregates, write_cohorts,
                        write_csv, write_steady_state)
from .steady_state import FiscalRule, settled_rule, solve_steady_state, steady_state_residuals
from .transition import TPIOptions, solve_transition

log = logging.getLogger("pension_olg")


def _common(p: argparse.ArgumentParser, out=True):
    p.add_argument("--config", type=Path, help="INI configuration file")
    if out:
        p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pension-olg", description=__doc__.splitlines()[0])
    ap.add_argument("--print-defaults", action="store_true", help="print the default configuration and exit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command")

    sub.add_parser("print-defaults", help="print the default configuration")

    p = sub.add_parser("calibrate", help="estimate alpha, A and the leisure-utility ellipse")
    p.add_argument("--data", type=Path, help="CSV with header year,Y,K,L (default: shipped series)")
    p.add_argument("--theta", type=float, default=None, help="Frisch elasticity for the ellipse fit")
    p.add_argument("--delta", type=float, default=None, help="depreciation for the implied interest rate")
    _common(p)

    p = sub.add_parser("solve-ss", help="baseline and settled steady states")
    p.add_argument("--scenario", help="comma-separated instruments whose settled state to solve")
    _common(p)

    p = sub.add_parser("transition", help="solve transition paths and write CSVs, charts and manifest")
    p.add_argument("--scenario", help=f"comma-separated, from {','.join(INSTRUMENTS)}")
    p.add_argument("--horizon", type=int, help="number of periods T")
    p.add_argument("--tol", type=float, default=1e-6, help="time-path tolerance")
    p.add_argument("--damping", type=float, default=0.3, help="initial time-path damping")
    p.add_argument("--no-timestamp", action="store_true", help="omit dates and timings from outputs")
    _common(p)

    p = sub.add_parser("report", help="redraw charts from the CSVs in --out")
    p.add_argument("--no-timestamp", action="store_true")
    _common(p)
    return ap


def _load(args) -> tuple[ModelParams, ScenarioSpec]:
    if getattr(args, "config", None):
        if not args.config.exists():
            raise ConfigError("--config", str(args.config), "file does not exist")
        return load_config(args.config)
    return ModelParams(), ScenarioSpec()


def _scenarios(arg, spec: ScenarioSpec, have_config: bool) -> list[str]:
    if arg:
        names = [s.strip() for s in arg.split(",") if s.strip()]
    elif have_config:
        names = [spec.instrument]
    else:
        names = list(REFORM_INSTRUMENTS)
    for n in names:
        if n not in INSTRUMENTS:
            raise ConfigError("--scenario", n, f"must be one of {INSTRUMENTS}")
    return names


def cmd_calibrate(args) -> int:
    params, _ = _load(args)
    series = ingest_series(args.data) if args.data else bundled_series()
    est = calibrate_technology(series)
    theta = args.theta if args.theta is not None else params.theta
    delta = args.delta if args.delta is not None else params.delta
    fit = fit_ellipse(theta, params.l_tilde)
    print(f"observations      {est.n_obs} ({series.year[0]}-{series.year[-1]})")
    print(f"alpha             {est.alpha:.4f}")
    print(f"A                 {est.A:.4f}")
    print(f"alpha (w/ const)  {est.alpha_with_intercept:.4f}  intercept {est.intercept_diag:.4f}  [diagnostic]")
    print(f"ellipse b         {fit.b:.4f}")
    print(f"ellipse nu        {fit.nu:.4f}")
    print(f"ellipse objective {fit.objective:.6g}  sup MU gap on [0.05, 0.95] "
          f"{ellipse_sup_gap(fit.b, fit.nu, theta, l_tilde=params.l_tilde):.4f}")
    print("note: inputs are assumed difference-stationary; no unit-root test is run.")
    print("note: the implied interest rate uses the estimation capital series as K, "
          "whether a stock or a flow series is intended is ambiguous.")
    args.out.mkdir(parents=True, exist_ok=True)
    Yhat = fitted_output(series, est.alpha, est.A)
    r = implied_interest(series, est.alpha, est.A, delta)
    rows = [[int(y), fmt_number(a), fmt_number(b), fmt_number(c)]
            for y, a, b, c in zip(series.year, series.Y, Yhat, r)]
    path = write_csv(args.out / "calibration_fit.csv", ["year", "Y", "Y_fitted", "r_implied"], rows)
    RunManifest("calibrate", str(args.config or ""), [], str(args.out), __version__,
                convergence={"ellipse": "converged" if fit.converged else "not converged"},
                files=[path]).write(include_timings=False)
    return 0


def _baseline(params):
    t = time.perf_counter()
    ss = solve_steady_state(params, FiscalRule.paygo(params), "baseline")
    return ss, time.perf_counter() - t


def cmd_solve_ss(args) -> int:
    params, spec = _load(args)
    names = _scenarios(args.scenario, spec, args.config is not None)
    args.out.mkdir(parents=True, exist_ok=True)
    base, dt = _baseline(params)
    man = RunManifest("solve-ss", str(args.config or ""), names, str(args.out), __version__)
    man.timings["baseline"] = dt
    man.convergence["baseline"] = _ss_conv(base, params)
    files = write_steady_state(base, args.out)
    _print_ss(base)
    for name in names:
        if name == "baseline_paygo":
            continue
        t = time.perf_counter()
        s = replace(spec, instrument=name)
        ss = solve_steady_state(params, settled_rule(s, base, params), f"settled_{name}",
                                K0=base.K, L0=base.L)
        man.timings[f"settled_{name}"] = time.perf_counter() - t
        man.convergence[f"settled_{name}"] = _ss_conv(ss, params)
        files += write_steady_state(ss, args.out)
        _print_ss(ss)
    man.files = files
    man.write(include_timings=False)
    return 0


def _ss_conv(ss, params) -> str:
    res = steady_state_residuals(ss, params)
    return f"outer_iterations={ss.iterations} max_residual={max(res.values()):.3e}"


def _print_ss(ss):
    print(f"{ss.label:<30} K={ss.K:.4f} L={ss.L:.4f} Y={ss.Y:.4f} C={ss.C:.4f} "
          f"w={ss.w:.4f} r={ss.r:.4f} transfer={ss.transfer:.4f}")


def cmd_transition(args) -> int:
    params, spec = _load(args)
    names = _scenarios(args.scenario, spec, args.config is not None)
    if args.horizon is not None:
        spec = replace(spec, horizon_T=args.horizon)
    spec.validate_against(params)
    opts = TPIOptions(tol=args.tol, damping=args.damping)
    args.out.mkdir(parents=True, exist_ok=True)
    man = RunManifest("transition", str(args.config or ""), names, str(args.out), __version__)

    base, dt = _baseline(params)
    man.timings["baseline_ss"] = dt
    files = write_steady_state(base, args.out)
    base_spec = replace(spec, instrument="baseline_paygo")
    t = time.perf_counter()
    base_path = solve_transition(base, base, base_spec, params, opts)
    man.timings["baseline_paygo"] = time.perf_counter() - t

    for name in names:
        s = replace(spec, instrument=name)
        t = time.perf_counter()
        if s.is_reform:
            final = solve_steady_state(params, settled_rule(s, base, params), f"settled_{name}",
                                       K0=base.K, L0=base.L)
            files += write_steady_state(final, args.out)
            res = solve_transition(base, final, s, params, opts)
        else:
            res = base_path
        man.timings[name] = time.perf_counter() - t
        man.convergence[name] = (f"iterations={res.iterations} path_change={res.path_change:.3e} "
                                 f"max_euler_residual={res.max_euler_residual:.3e}")
        files.append(write_aggregates(res, base_path, args.out))
        files.append(write_cohorts(res, base, args.out))
        y_end = res.path.Y[min(99, res.path.T - 1)] / base_path.path.Y[min(99, res.path.T - 1)] - 1
        print(f"{name:<20} iterations={res.iterations:<4d} output change by "
              f"{int(period_to_year(min(100, res.path.T)))}: {100 * y_end:+.2f}%")
    files += emit_charts(args.out, timestamp=not args.no_timestamp)
    man.files = files
    man.write(include_timings=not args.no_timestamp)
    return 0


def cmd_report(args) -> int:
    if not args.out.is_dir():
        raise ConfigError("--out", str(args.out), "directory does not exist")
    csvs = sorted(args.out.glob("aggregates_*.csv"))
    if not csvs:
        raise ConfigError("--out", str(args.out), "no aggregates_*.csv files to report on")
    names = [p.stem[len("aggregates_"):] for p in csvs]
    files = emit_charts(args.out, timestamp=not args.no_timestamp)
    files += sorted(args.out.glob("*.csv")) + sorted(args.out.glob("*_summary.txt"))
    RunManifest("report", str(args.config or ""), names, str(args.out), __version__,
                files=files).write(include_timings=False)
    return 0


COMMANDS = {"calibrate": cmd_calibrate, "solve-ss": cmd_solve_ss, "transition": cmd_transition,
            "report": cmd_report}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_defaults or args.command == "print-defaults":
        sys.stdout.write(default_config_text())
        return 0
    if args.command is None:
        ap.print_help(sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SeriesError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, ScenarioInfeasible, NonFiniteError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
