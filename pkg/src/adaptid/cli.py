"""Command-line harness: simulate, sweep, verify, compare, version.

Exit codes: 0 on success, 1 on config errors or failed verification,
2 on I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, default_sweep_grid, load_config, load_sweep_grid
from .equivalence import run_verification
from .harness import (
    compare_direct_indirect,
    compute_metrics,
    config_hash,
    metrics_to_csv,
    run_episode,
    run_sweep,
    trace_to_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptid",
        description="Closed-loop simulation harness for online inverse-dynamics correction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one episode and write its trace CSV")
    sim.add_argument("config", type=Path)
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    sim.add_argument("--out", type=Path, default=Path("."), help="output directory")

    swp = sub.add_parser("sweep", help="run the hyperparameter sensitivity sweep")
    swp.add_argument("config", type=Path)
    swp.add_argument("--grid", type=Path, default=None, help="grid file (default: full grid)")
    swp.add_argument("--trials", type=int, default=None)
    swp.add_argument("--jobs", type=int, default=1)
    swp.add_argument("--seed", type=int, default=None)
    swp.add_argument("--out", type=Path, default=Path("."))

    ver = sub.add_parser("verify", help="check the PID and virtual-velocity identities")
    ver.add_argument("--out", type=Path, default=Path("."))

    cmp_ = sub.add_parser("compare", help="direct vs indirect learner on a sticky joint")
    cmp_.add_argument("config", type=Path)
    cmp_.add_argument("--seed", type=int, default=None)
    cmp_.add_argument("--out", type=Path, default=Path("."))

    sub.add_parser("version", help="print the package version")
    return parser


def _load(path: Path, seed: int | None):
    config = load_config(path)
    if seed is not None:
        config = config.with_seed(seed)
    return config


def _cmd_simulate(args) -> int:
    config = _load(args.config, args.seed)
    trace = run_episode(config)
    args.out.mkdir(parents=True, exist_ok=True)
    out_path = args.out / f"trace_{config_hash(config)}.csv"
    trace_to_csv(trace, out_path)
    metrics = compute_metrics(trace) if trace.rows > trace.first_valid_row else None
    print(f"episode: {trace.rows} ticks, success={trace.success}")
    if trace.fail_reason:
        print(f"terminated at t={trace.fail_time:.3f}s: {trace.fail_reason}")
    if trace.rows:
        final_q = ", ".join(f"{v:.4f}" for v in trace.q[-1])
        print(f"final position: [{final_q}]")
    if metrics is not None:
        err = ", ".join(f"{v:.4g}" for v in metrics.mean_abs_accel_error)
        print(f"mean |accel error| per joint: [{err}]")
    print(f"wrote {out_path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _load(args.config, args.seed)
    grid = default_sweep_grid() if args.grid is None else load_sweep_grid(args.grid)
    rows = run_sweep(config, grid, trials=args.trials, jobs=args.jobs)
    args.out.mkdir(parents=True, exist_ok=True)
    out_path = args.out / "metrics.csv"
    metrics_to_csv(rows, out_path)
    n_combos = len(grid)
    n_fail = sum(1 for r in rows if r.segment == 0 and not r.success)
    print(f"sweep: {n_combos} combos, {n_fail} unsuccessful")
    print(f"wrote {out_path}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    lines, all_ok = run_verification()
    args.out.mkdir(parents=True, exist_ok=True)
    out_path = args.out / "verify_report.txt"
    report = "\n".join(lines) + f"\noverall: {'PASS' if all_ok else 'FAIL'}\n"
    out_path.write_text(report, encoding="utf-8")
    print(report, end="")
    print(f"wrote {out_path}")
    return EXIT_OK if all_ok else EXIT_CONFIG


def _cmd_compare(args) -> int:
    config = _load(args.config, args.seed)
    result = compare_direct_indirect(config)
    args.out.mkdir(parents=True, exist_ok=True)
    trace_to_csv(result.direct_trace, args.out / "compare_direct.csv")
    trace_to_csv(result.indirect_trace, args.out / "compare_indirect.csv")
    report = "\n".join(result.report_lines()) + "\n"
    (args.out / "compare_report.txt").write_text(report, encoding="utf-8")
    print(report, end="")
    print(f"wrote {args.out / 'compare_report.txt'}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    np.set_printoptions(precision=6, suppress=True)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "version":
            print(__version__)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
