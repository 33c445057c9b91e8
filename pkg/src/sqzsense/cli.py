"""Command-line front end: ``sqzsense {simulate,reconstruct,report,validate-config}``.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .campaign import (WORKERS_ENV, build_campaign, load_config, reconstruct_directory,
                       report, run_campaign)
from .errors import NumericalError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("sqzsense")


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", help="JSON campaign config (defaults are used if omitted)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. --set campaign.m=500 (repeatable)")
    p.add_argument("--seed", type=int, help="shortcut for --set campaign.seed=...")
    p.add_argument("--m", type=int, help="repetitions per filter")
    p.add_argument("--k", type=int, help="number of filters")
    p.add_argument("--n", type=int, help="Zeno measurements per run")
    p.add_argument("--mode", choices=["exact", "second-order"])


def _collect_overrides(args) -> list[str]:
    out = list(args.overrides)
    for flag, key in (("seed", "campaign.seed"), ("m", "campaign.m"), ("k", "bank.k"),
                      ("n", "schedule.n"), ("mode", "campaign.mode")):
        value = getattr(args, flag, None)
        if value is not None:
            out.append(f"{key}={json.dumps(value)}")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqzsense", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a full campaign and write an artifact directory")
    _config_args(p)
    p.add_argument("-o", "--out", required=True, help="artifact directory")
    p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    p.add_argument("--overwrite", action="store_true", help="replace an existing directory")

    p = sub.add_parser("reconstruct", help="redo estimation and inversion from stored records")
    p.add_argument("directory")
    p.add_argument("--eps", type=float, help="relative eigenvalue truncation threshold")
    p.add_argument("--max-condition", type=float)
    p.add_argument("--band", type=float, nargs=2, metavar=("LO", "HI"))

    p = sub.add_parser("report", help="summary table and plot-ready CSV files")
    p.add_argument("directory")
    p.add_argument("-o", "--out", help="report directory (default DIRECTORY/report)")

    p = sub.add_parser("validate-config", help="check a config and print the resolved values")
    _config_args(p)
    return parser


def _dispatch(args) -> int:
    if args.command == "validate-config":
        config = load_config(args.config, _collect_overrides(args))
        camp = build_campaign(config)
        print(json.dumps(config, indent=2, sort_keys=True))
        print(f"ok: K={camp.K} M={camp.M} N={camp.schedule.n} dt={camp.dt:.6g} "
              f"omega_max={camp.omega_max:.6g}")
    elif args.command == "simulate":
        config = load_config(args.config, _collect_overrides(args))
        manifest = run_campaign(config, args.out, workers=args.workers, overwrite=args.overwrite)
        print(f"wrote {args.out} ({manifest['resolved']['K']} filters x {manifest['resolved']['M']} runs)")
    elif args.command == "reconstruct":
        diag = reconstruct_directory(args.directory, args.eps, args.max_condition, args.band)
        print(json.dumps(diag, indent=2, sort_keys=True))
    elif args.command == "report":
        result = report(args.directory, args.out)
        sys.stdout.write(result["summary"])
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
