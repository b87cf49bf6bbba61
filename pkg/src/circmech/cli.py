"""Command line entry point: ``circmech run|taxonomy|reduce``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from . import constructs as cg
from .config import ConfigError, parse_config
from .harness import EXIT_ERROR, EXIT_OK, construct_report, render_json, run_scenario


def _run(args) -> int:
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    result = run_scenario(cfg)
    if result.status == EXIT_ERROR:
        print(f"error: {result.message}", file=sys.stderr)
        return result.status
    for path in result.artifacts:
        print(path)
    if result.status != EXIT_OK:
        print(f"warning: {result.message}", file=sys.stderr)
    return result.status


def _taxonomy(args) -> int:
    try:
        entries = cg.load_taxonomy(args.file)
    except cg.TaxonomyError as exc:
        print(f"taxonomy error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for e in entries:
        print(f"{e.name:45s} {e.mech_type.value:9s} {e.reducible.value:12s} {e.unactionability.value}")
    return EXIT_OK


def _reduce(args) -> int:
    try:
        construct = cg.load_construct(args.construct)
    except cg.ConstructError as exc:
        print(f"construct error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(cg.serialize_construct(cg.collapse_myerson_chains(construct)))
    sys.stdout.write(render_json(construct_report(construct)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="circmech", description=__doc__)
    parser.add_argument("--version", action="version", version=f"circmech {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("config")
    run.set_defaults(func=_run)

    tax = sub.add_parser("taxonomy", help="validate and print a taxonomy file")
    tax.add_argument("file", nargs="?", default=None, help="defaults to the bundled table")
    tax.set_defaults(func=_taxonomy)

    red = sub.add_parser("reduce", help="collapse Myerson chains in a construct file")
    red.add_argument("construct")
    red.set_defaults(func=_reduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
