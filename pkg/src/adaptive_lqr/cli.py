"""Command-line front end.

Subcommands: dare, simulate, sweep, rates, plot, gen-system.  All commands
are non-interactive and exit with documented codes:

    0  success
    2  invalid config or flags
    3  insufficient data
    4  numeric failure (unstabilizable, diverged, too many failed replicates)

The master stream seed resolves with precedence: --seed flag, then the
ADAPTIVE_LQR_SEED environment variable, then the config file.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .analysis import build_rate_report
from .config import (
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    load_config,
)
from .control_core import check_stabilizing, random_system, solve_dare, spectral_norm
from .errors import (
    DivergedError,
    InsufficientDataError,
    InvalidInputError,
    NoDataError,
    NotStabilizableError,
    NumericError,
)
from .figures import save_rate_figures
from .lqr_sim import run_algorithm
from .noise import NoiseStreams
from .records import read_all_records
from .svgplot import write_rate_svg
from .sweep import FAILURE_FRACTION_LIMIT, write_sweep
from .version import __version__

ENV_SEED = "ADAPTIVE_LQR_SEED"

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_DATA = 3
EXIT_NUMERIC = 4


def _effective_seed(args) -> int | None:
    seed = getattr(args, "seed", None)
    if seed is not None:
        return int(seed)
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise InvalidInputError(
                f"{ENV_SEED} must be an integer, got {env!r}"
            ) from exc
    return None


def _load(args) -> ExperimentConfig:
    if args.config is None:
        raise InvalidInputError("--config PATH is required")
    return load_config(args.config, seed_override=_effective_seed(args))


def cmd_dare(args) -> int:
    cfg = _load(args)
    spec = cfg.spec
    sol = solve_dare(spec.A, spec.B, spec.Q, spec.R)
    if args.json:
        print(json.dumps({
            "n": spec.n,
            "d": spec.d,
            "P": [float(v) for v in sol.P.ravel()],
            "K": [float(v) for v in sol.K.ravel()],
            "residual": sol.residual,
            "closed_loop_radius": sol.closed_loop_radius,
            "iterations": sol.iterations,
        }, sort_keys=True))
    else:
        print("P:")
        print(np.array2string(sol.P, precision=10))
        print("K:")
        print(np.array2string(sol.K, precision=10))
        print(f"residual: {sol.residual:.3e}")
        print(f"closed_loop_radius: {sol.closed_loop_radius:.10f}")
        print(f"iterations: {sol.iterations}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    horizon = args.horizon if args.horizon is not None else cfg.T_grid[0]
    streams = NoiseStreams(
        seed=cfg.seed, replicate_id=0,
        n=cfg.n, d=cfg.d, sigma_eps=cfg.spec.sigma_eps,
    )
    rec = run_algorithm(
        cfg.spec, cfg.algo, streams, int(horizon), collect_trajectory=True,
    )
    traj = rec.trajectory
    header = (
        ["t"]
        + [f"x{i}" for i in range(cfg.n)]
        + [f"u{i}" for i in range(cfg.d)]
        + [f"eta{i}" for i in range(cfg.d)]
        + ["cost", "reset"]
    )

    def emit(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t in range(traj.x.shape[0]):
            row = [t]
            row.extend(repr(float(v)) for v in traj.x[t])
            row.extend(repr(float(v)) for v in traj.u[t])
            row.extend(repr(float(v)) for v in traj.eta[t])
            row.append(repr(float(traj.cost[t])))
            row.append(traj.reset[t])
            writer.writerow(row)

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            emit(fh)
        print(f"wrote {args.out} ({traj.x.shape[0]} rows)", file=sys.stderr)
    else:
        emit(sys.stdout)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    summary = write_sweep(cfg, results_dir=args.out, jobs=args.jobs)
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(f"results dir: {summary['results_dir']}")
        print(f"records: {summary['n_records']} "
              f"({len(summary['record_files'])} horizons x "
              f"{summary['n_replicates']} replicates)")
        print(f"failed replicates: {100.0 * summary['failed_fraction']:.1f}%")
        print(f"manifest: {summary['manifest']}")
    if summary["failed_fraction"] > FAILURE_FRACTION_LIMIT:
        print(
            f"error: {100.0 * summary['failed_fraction']:.1f}% of replicates "
            f"diverged (limit {100.0 * FAILURE_FRACTION_LIMIT:.0f}%)",
            file=sys.stderr,
        )
        return EXIT_NUMERIC
    return EXIT_OK


def _format_band(band) -> str:
    lo = "" if band[0] is None else f"{band[0]:+.2f}"
    hi = "" if band[1] is None else f"{band[1]:+.2f}"
    return f"[{lo}, {hi}]"


def _print_report_table(report: dict) -> None:
    horizons = report["horizons"]
    print(f"horizons: {', '.join(str(T) for T in horizons)}")
    print(f"records: {report['n_records']}")
    print()
    print(f"{'statistic':<17}{'slope':>9}{'stderr':>9}{'r2':>8}  "
          f"{'band':<16}{'pass':<5}")
    for name, entry in report["stats"].items():
        slope = entry["slope"]
        if slope is None:
            print(f"{name:<17}{'-':>9}{'-':>9}{'-':>8}  "
                  f"{_format_band(entry['band']):<16}{'n/a':<5}")
            continue
        passed = "yes" if entry["passed"] else "NO"
        print(f"{name:<17}{slope:>+9.3f}{entry['stderr']:>9.3f}"
              f"{entry['r_squared']:>8.3f}  "
              f"{_format_band(entry['band']):<16}{passed:<5}")
    print()
    print("medians:")
    names = list(report["stats"])
    print("T".ljust(9) + "".join(f"{n:>17}" for n in names))
    for i, T in enumerate(horizons):
        cells = []
        for n in names:
            med = report["stats"][n]["medians"][i][1]
            cells.append(f"{med:>17.6g}" if med is not None else f"{'':>17}")
        print(f"{T:<9}" + "".join(cells))


def _write_medians_csv(report: dict, path: str) -> None:
    names = list(report["stats"])
    with open(path, "w", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["T"] + names)
        for i, T in enumerate(report["horizons"]):
            row = [T]
            for n in names:
                med = report["stats"][n]["medians"][i][1]
                row.append("" if med is None else repr(float(med)))
            writer.writerow(row)


def cmd_rates(args) -> int:
    records = read_all_records(args.results_dir)
    report = build_rate_report(records)
    if args.json:
        print(json.dumps(report, sort_keys=True))
    else:
        _print_report_table(report)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "rates.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_medians_csv(report, os.path.join(args.out, "medians.csv"))
        figure_paths = save_rate_figures(report, args.out)
        written = ["rates.json", "medians.csv"]
        written += [os.path.basename(p) for p in figure_paths]
        print(f"report files in {args.out}: {', '.join(written)}", file=sys.stderr)
    return EXIT_OK


def cmd_plot(args) -> int:
    records = read_all_records(args.results_dir)
    report = build_rate_report(records)
    out = args.out if args.out else os.path.join(args.results_dir, "rates.svg")
    write_rate_svg(report, out)
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def cmd_gen_system(args) -> int:
    if args.n < 1 or args.d < 1:
        raise InvalidInputError("n and d must be >= 1")
    if not (0.0 < args.spectral_radius < 1.0):
        raise InvalidInputError(
            f"spectral radius must be in (0, 1) for K0 = 0, got {args.spectral_radius}"
        )
    spec = random_system(args.n, args.d, args.spectral_radius, args.seed)
    if not check_stabilizing(spec.A, spec.B, np.zeros((spec.d, spec.n))):
        raise NumericError("sampled system is not stabilized by K0 = 0")
    sol = solve_dare(spec.A, spec.B, spec.Q, spec.R)
    doc = {
        "n": spec.n,
        "d": spec.d,
        "system": {
            "A": [float(v) for v in spec.A.ravel()],
            "B": [float(v) for v in spec.B.ravel()],
            "Q": [float(v) for v in spec.Q.ravel()],
            "R": [float(v) for v in spec.R.ravel()],
            "sigma_eps": 1.0,
            "x0": [0.0] * spec.n,
        },
        "algo": {
            "K0": [0.0] * (spec.d * spec.n),
            "C_x": 20.0,
            "C_K": max(5.0, 2.0 * spectral_norm(sol.K)),
            "sigma_eta": 1.0,
        },
        "sweep": {
            "T_grid": [1024, 2048, 4096, 8192, 16384],
            "seeds": 20,
            "seed": 0,
            "coupled": True,
        },
        "output_dir": "results",
    }
    cfg = config_from_dict(doc)
    text = json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptive-lqr",
        description="Adaptive LQR benchmark: simulation, sweeps, and rate reports.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, config=False, seed=False, jobs=False):
        p.add_argument("--json", action="store_true",
                       help="machine-readable output")
        p.add_argument("--out", default=None, metavar="PATH",
                       help="output file or directory")
        if config:
            p.add_argument("--config", default=None, metavar="PATH",
                           help="experiment config JSON")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help=f"master stream seed (overrides {ENV_SEED} and config)")
        if jobs:
            p.add_argument("--jobs", type=int, default=1, metavar="N",
                           help="worker processes for the sweep")

    p = sub.add_parser("dare", help="solve the control fixed point for a config")
    common(p, config=True)
    p.set_defaults(func=cmd_dare)

    p = sub.add_parser("simulate", help="run one adaptive trajectory, emit CSV")
    common(p, config=True, seed=True)
    p.add_argument("--horizon", type=int, default=None,
                   help="steps to simulate (default: first sweep horizon)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run the paired Monte Carlo sweep")
    common(p, config=True, seed=True, jobs=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("rates", help="fit rate slopes from sweep records")
    p.add_argument("results_dir", help="directory holding records_T*.jsonl")
    common(p)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("plot", help="render log-log SVG charts from records")
    p.add_argument("results_dir", help="directory holding records_T*.jsonl")
    common(p)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("gen-system", help="sample a random stabilizable config")
    common(p)
    p.add_argument("--n", type=int, required=True, help="state dimension")
    p.add_argument("--d", type=int, required=True, help="input dimension")
    p.add_argument("--spectral-radius", type=float, required=True,
                   help="target spectral radius of A, in (0, 1)")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.set_defaults(func=cmd_gen_system)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InsufficientDataError, NoDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_DATA
    except (NotStabilizableError, NumericError, DivergedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
