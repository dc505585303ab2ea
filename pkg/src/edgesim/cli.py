"""Command-line interface: run, compare, plotdata.

Exit codes: 0 success, 1 usage or parse error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .engine import BACKEND
from .runner import (ResultsFormatError, RunnerError, compare, comparison_csv, plotdata,
                     ratio_bands, read_results, run_scenario)
from .scenario import TOPOLOGIES, ScenarioError, parse_scenario, with_overrides

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def csv_of(conv):
    def parse(text: str):
        try:
            items = tuple(conv(item.strip()) for item in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        return items
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="edgesim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"edgesim {__version__} ({BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    run = sub.add_parser("run", help="run a scenario grid")
    run.add_argument("scenario", type=Path)
    run.add_argument("--out", type=Path, default=Path("results"))
    run.add_argument("--seed", type=int)
    run.add_argument("--topology", choices=TOPOLOGIES + ("both",), default="both")
    run.add_argument("--users", type=csv_of(int))
    run.add_argument("--x", type=csv_of(float), help="x_total_ms values")
    run.add_argument("--proc", type=csv_of(float), help="processing_ms values")
    run.add_argument("--reps", type=int)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--trace", action="store_true", help="write per-run event traces")
    run.add_argument("--details", action="store_true",
                     help="write per-run histograms, replica timelines and autoscaler decisions")
    run.add_argument("--quiet", action="store_true")

    cmp_ = sub.add_parser("compare", help="compare single-site and multi-site results")
    cmp_.add_argument("single", type=Path)
    cmp_.add_argument("multi", type=Path)
    cmp_.add_argument("--on", choices=("x_total", "access"), default="x_total",
                      help="pair rows by end-to-end delay (default) or by client access delay")
    cmp_.add_argument("--out", type=Path, help="also write the comparison CSV here")

    plot = sub.add_parser("plotdata", help="write per-panel throughput tables")
    plot.add_argument("results", type=Path)
    plot.add_argument("--out", type=Path, required=True)
    return parser


def cmd_run(args) -> int:
    try:
        text = args.scenario.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read scenario: {exc}") from None
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    config = parse_scenario(text)
    config = with_overrides(config, seed=args.seed, user_grid=args.users, delay_grid=args.x,
                            processing_grid=args.proc, repetitions=args.reps)
    topologies = TOPOLOGIES if args.topology == "both" else (args.topology,)

    def progress(kind, done, total):
        if not args.quiet:
            print(f"\r{kind}: {done}/{total}", end="" if done < total else "\n", file=sys.stderr)

    summary = run_scenario(config, args.out, topologies, jobs=args.jobs, fmt=args.format,
                           trace=args.trace, details=args.details, progress=progress)
    for path in summary.files:
        print(path)
    if summary.interrupted:
        print("interrupted; partial results written", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_compare(args) -> int:
    single = read_results(args.single)
    multi = read_results(args.multi)
    rows = compare(single, multi, on=args.on, warn=lambda m: print(f"warning: {m}", file=sys.stderr))
    table = comparison_csv(rows)
    sys.stdout.write(table)
    print("users,n,min_ratio,mean_ratio,max_ratio")
    for band in ratio_bands(rows):
        print(f"{band['users']},{band['n']},{band['min']:.4f},{band['mean']:.4f},{band['max']:.4f}")
    if args.out:
        args.out.write_text(table, encoding="utf-8")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    for path in plotdata(read_results(args.results), args.out):
        print(path)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "plotdata": cmd_plotdata}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResultsFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RunnerError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
