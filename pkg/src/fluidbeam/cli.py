"""Command-line front end.

::

    fluidbeam solve --seed 7 --scheme FA
    fluidbeam sweep-sinr --profile desk --out runs/sinr
    fluidbeam sweep-users --profile desk --trials 20 --out runs/users
    fluidbeam sweep-region --profile desk --values 0,1,2,3 --out runs/region
    fluidbeam report runs/sinr
    fluidbeam selftest
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, harness, verify
from .baselines import solve_scheme
from .channel import sample_scenario
from .config import PROFILES, ConfigError, ScenarioConfig, SchemeId, load_config, parse_values, with_profile, watt_to_dbm

SWEEP_COMMANDS = {
    "sweep-sinr": "sinr_db",
    "sweep-users": "num_users",
    "sweep-region": "region_size",
}


def _add_scenario_args(p):
    p.add_argument("--config", type=Path, help="INI config file ([scenario], [solver], [sweep])")
    p.add_argument("--profile", choices=sorted(PROFILES), help="preset overriding the defaults")
    p.add_argument("--seed", type=int, help="base random seed")


def build_parser():
    parser = argparse.ArgumentParser(prog="fluidbeam",
                                     description="Power minimisation with movable receive antennas.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one sampled scenario and print the result")
    _add_scenario_args(p)
    p.add_argument("--scheme", default="FA", help="FA, FPA, APS or MCP (default FA)")

    for name, axis in SWEEP_COMMANDS.items():
        p = sub.add_parser(name, help=f"Monte-Carlo sweep over {axis}")
        _add_scenario_args(p)
        p.add_argument("--trials", type=int, help="channel draws per axis value")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--schemes", help="comma-separated subset of FA,FPA,APS,MCP")
        p.add_argument("--values", help="comma-separated axis values")
        p.add_argument("--workers", type=int, help="worker processes (default FLUIDBEAM_THREADS or all cores)")
        p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
        p.set_defaults(axis=axis)

    p = sub.add_parser("report", help="redraw the figure from an existing summary.csv")
    p.add_argument("out", type=Path, help="sweep output directory")

    p = sub.add_parser("selftest", help="run the randomised oracle checks")
    p.add_argument("--scale", type=float, default=0.1,
                   help="fraction of the full instance counts (default 0.1)")
    return parser


def _resolve_config(args):
    values = None
    if args.config is not None:
        config, values = load_config(args.config, args.profile)
    else:
        config = ScenarioConfig()
        if args.profile:
            config = with_profile(config, args.profile)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        updates["trials"] = args.trials
    if getattr(args, "schemes", None):
        updates["schemes"] = SchemeId.parse_list(args.schemes)
    if updates:
        try:
            config = replace(config, **updates)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if getattr(args, "values", None):
        values = parse_values(args.values)
    return config, values


def format_result(scheme, config, scenario, res):
    """Plain ``key: value`` rendering of a solve result."""
    lines = [
        f"scheme: {scheme}",
        f"seed: {config.seed}",
        f"scenario_digest: {scenario.digest()}",
        f"users: {scenario.n_users}",
        f"antennas: {scenario.n_antennas}",
        f"converged: {str(res.converged).lower()}",
        f"total_power_w: {res.total_power:.9e}",
        f"total_power_dbm: {watt_to_dbm(res.total_power):.6f}",
        f"xi: {res.xi:.3e}",
        f"iters_outer: {res.outer_iterations}",
        f"iters_inner_total: {res.inner_iterations}",
        f"sinr_target_db: {config.sinr_target_db:.6f}",
        "per_user:",
    ]
    sinr_db = 10.0 * np.log10(res.per_user_sinr)
    power_dbm = [watt_to_dbm(float(np.sum(np.abs(w) ** 2))) for w in res.W.T]
    for k in range(scenario.n_users):
        x, y = res.positions[k]
        lines.append(f"  - user: {k}\n    position: [{x:.6f}, {y:.6f}]\n"
                     f"    sinr_db: {sinr_db[k]:.6f}\n    power_dbm: {power_dbm[k]:.6f}")
    return "\n".join(lines)


def cmd_solve(args):
    config, _ = _resolve_config(args)
    scheme = SchemeId.parse_list(args.scheme)
    if len(scheme) != 1:
        raise ConfigError("--scheme takes exactly one scheme")
    scenario = sample_scenario(config, harness.trial_seed(config.seed, 0))
    res = solve_scheme(scheme[0], scenario, config.solver)
    print(format_result(scheme[0].value, config, scenario, res))
    return 0


def _write_figures(rows, axis, out, plot=True):
    name = harness.FIGURE_NAMES[axis]
    harness.write_plot_data(rows, out / f"{name}.dat", axis)
    if plot:
        from .plotting import plot_summary

        plot_summary(rows, axis, out / f"{name}.png")


def cmd_sweep(args):
    config, values = _resolve_config(args)
    sweep = harness.SweepSpec(args.axis, values if values is not None else harness.DEFAULT_VALUES[args.axis])
    for v in sweep.values:
        sweep.apply(config, v)   # validate every point before any output exists
    if args.workers is not None and args.workers < 1:
        raise ConfigError("--workers must be positive")

    total = len(sweep.values) * config.trials
    t0 = time.perf_counter()

    def progress(done, n):
        if done == n or done % max(1, n // 20) == 0:
            print(f"\r{done}/{n} trials ({time.perf_counter() - t0:.0f} s)", end="", file=sys.stderr)

    print(f"{args.axis}: {len(sweep.values)} values x {config.trials} trials x "
          f"{len(config.schemes)} schemes", file=sys.stderr)
    records = harness.run_sweep(config, sweep, workers=args.workers, progress=progress)
    print(file=sys.stderr)
    rows = harness.aggregate(records)

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    harness.write_records(records, out / "records.csv")
    harness.write_timings(records, out / "timings.csv")
    harness.write_summary(rows, out / "summary.csv")
    _write_figures(rows, args.axis, out, plot=not args.no_plot)
    for r in rows:
        print(f"{r.scheme:4s} {args.axis}={r.axis_value:g}: {r.mean_power_dbm:8.3f} dBm "
              f"(converged {100 * r.converged_rate:.0f}%)")
    print(f"wrote {out} ({total} trials)", file=sys.stderr)
    return 0


def cmd_report(args):
    path = args.out / "summary.csv"
    if not path.is_file():
        raise ConfigError(f"no summary.csv in {args.out}")
    rows = harness.read_summary(path)
    if not rows:
        raise ConfigError(f"{path} has no rows")
    axes = {r.axis for r in rows}
    if len(axes) != 1 or not axes <= set(harness.FIGURE_NAMES):
        raise ConfigError(f"{path}: expected a single known axis, got {sorted(axes)}")
    _write_figures(rows, axes.pop(), args.out)
    return 0


def cmd_selftest(args):
    if not args.scale > 0:
        raise ConfigError("--scale must be positive")
    results = verify.run_all(args.scale)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command in SWEEP_COMMANDS:
            return cmd_sweep(args)
        if args.command == "report":
            return cmd_report(args)
        return cmd_selftest(args)
    except ConfigError as exc:
        print(f"fluidbeam: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fluidbeam: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
