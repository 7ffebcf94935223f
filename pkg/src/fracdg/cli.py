"""Command line entry point: ``fracdg run | list-presets | emit``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import FracDGError
from .harness import (
    RunRecord,
    emit_tables,
    get_preset,
    load_config,
    preset_registry,
    run_experiment,
)

logger = logging.getLogger("fracdg")


def _levels(text: str) -> tuple:
    try:
        return tuple(int(k) for k in text.split(",") if k.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers: {text}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracdg",
        description="Convergence experiments for DG time stepping of time-fractional diffusion.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a TOML experiment file")
    run.add_argument("target", help="preset name or path to a .toml config")
    run.add_argument("--cache-dir", type=Path, default=Path(".fracdg-cache"),
                     help="directory for reference checkpoints (default: %(default)s)")
    run.add_argument("--out", type=Path, default=Path("."),
                     help="output root for tables/ and records/ (default: %(default)s)")
    run.add_argument("--levels", type=_levels, help="override the ladder, e.g. 8,9,10")
    run.add_argument("--alpha", type=float, help="override the fractional order")
    run.add_argument("--jobs", type=int, default=1, help="ladder levels solved concurrently")
    run.add_argument("--seed", type=int, default=None,
                     help="seed recorded for randomized property suites; solver paths ignore it")
    run.add_argument("--format", choices=("csv", "markdown"), default="markdown",
                     help="table printed to stdout")

    lst = sub.add_parser("list-presets", help="list registered experiment presets")
    lst.add_argument("--desk", action="store_true", help="only desk-scale presets")

    emit = sub.add_parser("emit", help="render a saved run record as a table")
    emit.add_argument("record", type=Path)
    emit.add_argument("--format", choices=("csv", "markdown"), default="csv")
    return parser


def _resolve(target: str):
    path = Path(target)
    if path.suffix == ".toml" or path.exists():
        return load_config(path)
    return get_preset(target)


def _cmd_run(args) -> int:
    spec = _resolve(args.target)
    overrides = {}
    if args.levels is not None:
        overrides["ladder"] = args.levels
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if overrides:
        spec = replace(spec, **overrides)
    record = run_experiment(spec, cache_dir=args.cache_dir, out_dir=args.out,
                            jobs=max(1, args.jobs), seed=args.seed)
    sys.stdout.write(emit_tables(record, args.format))
    for c in record.checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['metric']} order {c['value']:.2f} in [{c['lo']}, {c['hi']}]")
    for err in record.errors:
        print(f"ERROR {err}")
    print(f"total {record.timings['total']:.1f} s")
    if record.errors:
        return 2
    return 0 if record.passed else 1


def _cmd_list(args) -> int:
    for spec in preset_registry():
        if args.desk and not spec.desk:
            continue
        print(f"{spec.name:26s} table {spec.table:>2s}  {spec.description}")
    return 0


def _cmd_emit(args) -> int:
    record = RunRecord.from_json(args.record.read_text())
    sys.stdout.write(emit_tables(record, args.format))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _cmd_run, "list-presets": _cmd_list, "emit": _cmd_emit}
    try:
        return handlers[args.command](args)
    except (FracDGError, OSError) as exc:
        print(f"fracdg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
