"""Command line entry point: ``isac run`` and ``isac plot``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .harness import PLOT_KINDS, PRESETS, ConfigError, build_spec, emit_plot, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="isac", description="Secure cell-free ISAC simulation toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-draw progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment preset")
    run.add_argument("--preset", required=True, help=f"one of {', '.join(PRESETS)}")
    run.add_argument("--config", help="YAML file with scenario/experiment overrides")
    run.add_argument("--seed", type=_nonneg_int, default=0)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--draws", type=_pos_int, help="channel draws per sweep value (default 20)")
    run.add_argument("--trials", type=_pos_int, help="detection trials per hypothesis (default 5000)")
    run.add_argument("--workers", type=_pos_int, default=1, help="worker processes")
    run.add_argument("--no-plot", action="store_true", help="skip the SVG")

    plot = sub.add_parser("plot", help="plot a results.csv")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--kind", required=True, choices=PLOT_KINDS)
    plot.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            try:
                spec = build_spec(args.preset, args.config, args.seed, args.out,
                                  args.draws, args.trials, args.workers)
            except ConfigError as exc:
                print(f"isac: {exc}", file=sys.stderr)
                return EXIT_USAGE
            summary = run_experiment(spec, plot=not args.no_plot)
            print(f"wrote {args.out}/results.csv ({len(summary['results'])} summary entries)")
        else:
            emit_plot(args.csv, args.kind, args.out)
            print(f"wrote {args.out}")
    except ConfigError as exc:
        print(f"isac: {exc}", file=sys.stderr)
        return EXIT_RUNTIME if args.command == "run" else EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - any failure past parsing is a runtime error
        print(f"isac: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
