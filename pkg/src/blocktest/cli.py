"""Command-line entry point.

Exit codes: 0 success, 1 statistical failure (e.g. zero variance), 2 bad
arguments or I/O. Machine-readable output goes to stdout (or ``-o``),
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager

from .changetests import run_test
from .errors import BlockTestError, StatisticalError
from .fieldgen import DependenceSpec, DepKind, NoiseSpec, gen_field, SAR_MIN_ORDER
from .grid import MeanSurface, make_partition
from .io import ndvi, read_grid, scan_grid, tile_map, write_grid
from .montecarlo import emit_report, load_config, run_report


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def cmd_test(args) -> int:
    grid = read_grid(args.grid, delimiter=args.delimiter)
    res = run_test(grid, args.test, args.s, args.decorrelate, repair=args.repair)
    with _output(args.output) as out:
        out.write(json.dumps(res.to_json()) + "\n")
    p = res.partition
    _log(
        f"{res.kind.value} test on {p.n}x{p.m} grid, blocks {p.l_n}x{p.l_m} "
        f"({p.b_n}x{p.b_m}): statistic {res.statistic:.4f}, p-value {res.p_value:.4g}"
    )
    return 0


def cmd_scan(args) -> int:
    grid = read_grid(args.grid, delimiter=args.delimiter)
    decor = None if args.decorrelate == "none" else args.decorrelate
    tiles = scan_grid(grid, args.rows, args.cols, args.test, decor, args.alpha, args.s, args.repair)
    with _output(args.output) as out:
        for t in tiles:
            out.write(json.dumps(t.to_json()) + "\n")
    _log(f"tile p-values ({args.rows}x{args.cols}, * = rejected after Holm at {args.alpha}):")
    _log(tile_map(tiles, args.rows, args.cols).rstrip("\n"))
    _log(f"{sum(t.reject for t in tiles)} of {len(tiles)} tiles rejected")
    return 0


def cmd_ndvi(args) -> int:
    red = read_grid(args.red, delimiter=args.delimiter)
    nir = read_grid(args.nir, delimiter=args.delimiter)
    out, flagged = ndvi(red, nir)
    if args.output in (None, "-"):
        for row in out:
            sys.stdout.write(",".join(format(v, ".17g") for v in row) + "\n")
    else:
        write_grid(out, args.output)
    _log(f"ndvi: {out.shape[0]}x{out.shape[1]} cells, {flagged} zero-denominator cells set to 0")
    return 0


def cmd_simulate(args) -> int:
    config = load_config(args.config, master_seed=args.seed, workers=args.workers)
    report = run_report(config)
    with _output(args.output) as out:
        out.write(emit_report(report, args.format))
    _log(f"simulate: {len(report.rows)} rows, master seed {config.master_seed}")
    return 0


def cmd_generate(args) -> int:
    m = args.m or args.n
    kind = DepKind.parse(args.dep)
    if kind is DepKind.IID:
        dep = DependenceSpec()
    elif kind is DepKind.SMA:
        dep = DependenceSpec.sma(args.q or 1, args.rho)
    else:
        dep = DependenceSpec.sar(args.rho, q=args.q or SAR_MIN_ORDER)
    p = make_partition(args.n, m, args.s) if args.surface == "a1" else None
    field = gen_field(
        args.n, m, MeanSurface(args.surface, args.amplitude), dep, NoiseSpec(args.dist, args.seed), p
    )
    if args.output in (None, "-"):
        for row in field:
            sys.stdout.write(",".join(format(v, ".17g") for v in row) + "\n")
    else:
        write_grid(field, args.output)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _log(f"{self.prog}: error: {message}")
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blocktest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--delimiter", default=",")
        p.add_argument("--s", type=float, default=0.6, help="block-length exponent target")
        p.add_argument("-o", "--output", default=None)

    p = sub.add_parser("test", help="test one grid for a constant mean")
    p.add_argument("grid")
    p.add_argument("--test", choices=["gmd", "var"], default="var")
    p.add_argument("--decorrelate", choices=["full", "separable"], default=None)
    p.add_argument("--repair", choices=["modchol", "floor"], default="modchol")
    common(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("scan", help="test every tile and apply Holm's correction")
    p.add_argument("grid")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--test", choices=["gmd", "var"], default="var")
    p.add_argument("--decorrelate", choices=["full", "separable", "none"], default="separable")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--repair", choices=["modchol", "floor"], default="modchol")
    common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("ndvi", help="NDVI grid from red and near-infrared bands")
    p.add_argument("--red", required=True)
    p.add_argument("--nir", required=True)
    p.add_argument("--delimiter", default=",")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_ndvi)

    p = sub.add_parser("simulate", help="run a Monte Carlo size/power experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides master_seed from the config")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--format", choices=["csv", "text"], default="csv")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="simulate a field and write it as CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--surface", choices=["constant", "a1", "a2", "a3", "a4"], default="constant")
    p.add_argument("--amplitude", type=float, default=0.0)
    p.add_argument("--dep", choices=["iid", "sma", "sar"], default="iid")
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--dist", choices=["normal", "t3", "chisq2"], default="normal")
    p.add_argument("--seed", type=int, required=True)
    common(p)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StatisticalError as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return 1
    except (BlockTestError, OSError, ValueError, KeyError) as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
