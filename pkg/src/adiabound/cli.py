"""Command-line entry point: ``adiabound <command> SCENARIO [options]``.

Exit codes: 0 success, 1 other module failure, 2 invalid input, 3 integration
failure, 4 degenerate spectrum.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ._io import dumps
from .errors import DegeneracyError, IntegrationError, ValidationError
from .scenario import (
    TaskError,
    load_document,
    parse_scenario,
    preset_document,
    preset_names,
    run,
    sweep,
    write_sweep_table,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_INTEGRATION = 3
EXIT_DEGENERACY = 4

COMMANDS = {
    "simulate": ["simulate"],
    "criteria": ["criteria"],
    "bounds": ["bounds"],
    "passages": ["passages"],
    "sweep": None,
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--out", help="directory for tables and report.json")
    p.add_argument("--seed", type=int, help="seed for random schedules (overrides the scenario)")
    p.add_argument("--tol", type=float, help="integrator tolerance (overrides the scenario)")
    p.add_argument("--workers", type=int, help="worker processes for sweeps")
    p.add_argument("--format", choices=("csv", "json"), help="table format")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adiabound", description="Adiabaticity criteria, bounds and passage experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} task" if name != "sweep" else "run a parameter sweep")
        p.add_argument("scenario", help="scenario JSON file, '-' for stdin, or preset:<name>")
        _common(p)
    p = sub.add_parser("preset", help="run a bundled scenario with its own task list")
    p.add_argument("name", nargs="?")
    p.add_argument("--list", action="store_true", help="list bundled scenarios")
    p.add_argument("--show", action="store_true", help="print the scenario document instead of running it")
    _common(p)
    return parser


def _read(source: str) -> dict:
    if source.startswith("preset:"):
        return preset_document(source[len("preset:"):])
    if source == "-":
        return load_document(sys.stdin.read(), "<stdin>")
    path = Path(source)
    if not path.is_file():
        raise ValidationError("scenario", f"no such file: {source}")
    return load_document(path.read_text(), source)


def _overrides(args, tasks=None) -> dict:
    return {
        "seed": args.seed,
        "tol": args.tol,
        "out": args.out,
        "format": args.format,
        "workers": args.workers,
        "tasks": tasks,
    }


def _execute(args) -> int:
    if args.command == "preset":
        if args.list or not args.name:
            for name in preset_names():
                doc = preset_document(name)
                print(f"{name:28s} {doc.get('description', '')}")
            return EXIT_OK
        doc = preset_document(args.name)
        if args.show:
            print(dumps(doc))
            return EXIT_OK
        source, tasks = f"preset:{args.name}", None
    else:
        source, tasks = args.scenario, COMMANDS[args.command]
        doc = _read(source)

    scenario = parse_scenario(doc, overrides=_overrides(args, tasks))
    if args.command == "sweep":
        header, rows = sweep(scenario, workers=args.workers)
        path = write_sweep_table(scenario, header, rows)
        failed = sum(1 for r in rows if r[header.index("status")] != "ok")
        print(dumps({"points": len(rows), "failed": failed, "columns": header, "file": path, "rows": rows}))
        return EXIT_OK
    bundle = run(scenario, source=source)
    summary = dict(bundle.summary)
    if bundle.files:
        summary["files"] = bundle.files
    print(dumps(summary))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _execute(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except IntegrationError as exc:
        print(f"integration error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except DegeneracyError as exc:
        print(f"degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERACY
    except TaskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        cause = exc.cause
        if isinstance(cause, IntegrationError):
            return EXIT_INTEGRATION
        if isinstance(cause, DegeneracyError):
            return EXIT_DEGENERACY
        if isinstance(cause, ValidationError):
            return EXIT_INVALID
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
