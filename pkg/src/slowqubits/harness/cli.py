"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 invariant violation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from ..cycle import InvariantViolation, QuadratureError
from ..lindblad import DegenerateKernelError, SingularOperatorError
from ..parallel import WORKERS_ENV
from . import commands
from .config import PRESETS, ConfigError, load

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERICAL = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _grid(text: str):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return w, h


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration")
    common.add_argument("--preset", choices=PRESETS, help="built-in configuration (a --config file is layered on top)")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="output format (default from config)")
    common.add_argument("--nodes", type=_positive_int, metavar="N", help="quadrature / time-grid nodes")
    common.add_argument("--grid", type=_grid, metavar="WxH", help="sweep resolution")
    common.add_argument("--workers", type=_positive_int, metavar="N",
                        help=f"worker processes (default ${WORKERS_ENV} or 1)")

    p = _Parser(prog="slowqubits", description="Slow-driving Lindblad engine for driven qubit thermal machines.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("steady", parents=[common], help="frozen state at one control point")
    s.add_argument("--point", type=float, nargs="+", metavar="X", help="control point (B_x B_z)")
    b = sub.add_parser("benchmark", parents=[common], help="entropy-energy balance time series")
    b.add_argument("--summary", metavar="PATH", help="cycle-integral summary (default: <out>.summary.json)")
    w = sub.add_parser("sweep", parents=[common], help="field map over the (B_x, B_z) grid")
    w.add_argument("--field", help="rotor_L, rotor_R, max_eig_Lambda, max_eig_-Omega_L or max_eig_-Omega_R")
    sub.add_parser("cycle", parents=[common], help="per-cycle totals for one protocol")
    o = sub.add_parser("oracle-check", parents=[common], help="engine against closed-form references")
    o.add_argument("--seed", type=int, default=0)
    sub.add_parser("merit-scan", parents=[common], help="A^2/length^2 on circles over J, b and B0")
    return p


def _write(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load(args.config, args.preset)
        fmt = args.format or cfg.data["output"]["format"]
        out = args.out or cfg.data["output"]["path"]
        if args.command == "steady":
            result = commands.cmd_steady(cfg, None if args.point is None else np.array(args.point))
        elif args.command == "benchmark":
            result = commands.cmd_benchmark(cfg, args.nodes, args.workers)
        elif args.command == "sweep":
            result = commands.cmd_sweep(cfg, args.field, args.grid, args.workers)
        elif args.command == "cycle":
            result = commands.cmd_cycle(cfg, args.nodes, args.workers)
        elif args.command == "oracle-check":
            result = commands.cmd_oracle_check(cfg, args.nodes, args.seed)
        else:
            result = commands.cmd_merit_scan(cfg, args.nodes, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (QuadratureError, DegenerateKernelError, SingularOperatorError, FloatingPointError,
            np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    wall = f"{time.perf_counter() - t0:.3f} s"
    result.table.meta["wall_time"] = wall
    _write(result.table.render(fmt), out)
    for name, table in result.extra.items():
        table.meta["wall_time"] = wall
        if args.command == "benchmark" and name == "summary":
            path = args.summary or (None if out is None else f"{out}.summary.json")
            text = table.to_json()
            if path is None:
                sys.stderr.write(text)
            else:
                Path(path).write_text(text)
    for v in result.violations:
        print(f"invariant violation: {v}", file=sys.stderr)
    return EXIT_INVARIANT if result.violations else EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
