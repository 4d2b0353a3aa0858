"""Command-line entry point: ``dualris <subcommand> [options]``.

Results go to stdout, or to ``--out`` with a PNG figure of the same stem
next to it. Exit status is 0 on success, 2 when every realization of an
experiment is infeasible and 1 on any other error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .bcd import MODES, solve_baseline
from .errors import ExperimentInfeasible
from .experiments import (
    Experiment,
    emit_results,
    render_results,
    run_baselines,
    run_convergence,
    run_split_sweep,
    run_total_sweep,
)
from .scenario import SystemConfig, feasible_defaults, load_config, synthesize_scenario

log = logging.getLogger("dualris")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value file applied over the defaults")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--realizations", type=int, default=50, help="Monte-Carlo realizations per point")
    common.add_argument("--out", type=Path, help="results file; a .png figure is written beside it")
    common.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--reference-defaults", action="store_true",
                        help="keep mu = 1 mW instead of the feasible 0.1 mW")
    common.add_argument("--no-plot", action="store_true", help="skip the figure")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dualris", description="Transmit-power minimization with two self-powered RIS.")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", parents=[common], help="solve one realization and print its trace")
    solve.add_argument("--realization", type=int, default=0)
    solve.add_argument("--mode", choices=MODES, default="double")

    sub.add_parser("convergence", parents=[common], help="mean power per outer iteration")

    total = sub.add_parser("sweep-total", parents=[common], help="power versus N1 + N2 with N1 = N2")
    total.add_argument("--totals", type=_int_list, default=[20, 40, 60, 80, 100])

    split = sub.add_parser("sweep-split", parents=[common], help="power versus N1 at fixed N1 + N2")
    split.add_argument("--n-total", type=int, default=100)
    split.add_argument("--splits", type=_int_list, default=[0, 20, 40, 50, 60, 80, 100])

    sub.add_parser("baselines", parents=[common], help="all schemes on the configured system")
    return parser


def resolve_config(args: argparse.Namespace) -> SystemConfig:
    base = SystemConfig() if args.reference_defaults else feasible_defaults()
    cfg = load_config(args.config, base) if args.config else base
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _write(exp: Experiment, args: argparse.Namespace, title: str) -> None:
    if args.out is None:
        sys.stdout.write(render_results(exp.rows, args.format))
        return
    emit_results(exp.rows, args.out, args.format)
    if not args.no_plot:
        from .plotting import figure_path, plot_rows

        plot_rows(exp.rows, figure_path(args.out), title)
    for row in exp.rows:
        if row.n_infeasible:
            log.warning("%s=%s: %d of %d realizations infeasible", row.sweep_variable, row.sweep_value,
                        row.n_infeasible, row.n_ok + row.n_infeasible)


def _solve(cfg: SystemConfig, args: argparse.Namespace) -> int:
    ch = synthesize_scenario(cfg, args.realization)
    res = solve_baseline(ch, cfg, args.mode, args.realization)
    text = res.trace.to_jsonl()
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    if not res.trace.ok:
        log.error("%s: %s", res.trace.status, res.trace.message)
        return 2
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        n, w = args.realizations, args.workers
        if args.command == "solve":
            return _solve(cfg, args)
        if args.command == "convergence":
            _write(run_convergence(cfg, n, w), args, "convergence")
        elif args.command == "sweep-total":
            _write(run_total_sweep(cfg, args.totals, n, w), args, "N1 = N2")
        elif args.command == "sweep-split":
            _write(run_split_sweep(cfg, args.n_total, args.splits, n, w), args, f"N1 + N2 = {args.n_total}")
        elif args.command == "baselines":
            _write(run_baselines(cfg, n, w), args, f"N1 = {cfg.N1}, N2 = {cfg.N2}")
    except ExperimentInfeasible as exc:
        log.error("%s", exc)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI reports and maps to exit status 1
        log.error("%s: %s", type(exc).__name__, exc)
        if args.verbose:
            raise
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
