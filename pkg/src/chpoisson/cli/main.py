"""Command-line entry point.

Exit codes: 0 when every check passes, 1 when any check fails (or only
degenerate points were found), 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .. import __version__
from .report import catalog_list, catalog_text, export, report_from_dict, run
from .scenario import ScenarioError, parse_scenario

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _load(source):
    if source.startswith("catalog:"):
        return catalog_text(source.split(":", 1)[1])
    return Path(source).read_text()


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _cmd_catalog(args):
    if args.action == "list":
        for name in catalog_list():
            print(name)
        return EXIT_OK
    sys.stdout.write(catalog_text(args.name))
    return EXIT_OK


def _cmd_run(args):
    scenario = parse_scenario(_load(args.scenario))
    report = run(scenario, seed=args.seed, samples=args.samples, tol=args.tol,
                 fd_step=args.fd_step, trajectory_dir=args.trajectory_dir, jobs=args.jobs)
    _emit(export(report, args.format, args.include_timing), args.out)
    if args.timing_out:
        Path(args.timing_out).write_text(json.dumps(report.timing, indent=2, sort_keys=True))
    for c in report.checks:
        line = f"{c.verdict.upper():>22}  {c.id}"
        if c.error:
            line += f"  ({c.error})"
        print(line, file=sys.stderr)
    return report.exit_code


def _cmd_export(args):
    report = report_from_dict(json.loads(Path(args.report).read_text()))
    _emit(export(report, args.format), args.out)
    return report.exit_code


def build_parser():
    p = argparse.ArgumentParser(prog="chpoisson",
                                description="Verify controlled Hamiltonian scenarios.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    cat = sub.add_parser("catalog", help="list or show built-in scenarios")
    cat_sub = cat.add_subparsers(dest="action", required=True)
    cat_sub.add_parser("list")
    show = cat_sub.add_parser("show")
    show.add_argument("name")
    cat.set_defaults(func=_cmd_catalog)

    r = sub.add_parser("run", help="run a scenario file or catalog:<name>")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--samples", type=int, help="override every sample count")
    r.add_argument("--tol", type=float, help="override every check tolerance")
    r.add_argument("--fd-step", type=float, help="relative finite-difference step")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.add_argument("--out", help="write the report here instead of stdout")
    r.add_argument("--include-timing", action="store_true",
                   help="embed wall-clock timing (breaks byte-identical reports)")
    r.add_argument("--timing-out", help="write wall-clock timing to a separate JSON file")
    r.add_argument("--trajectory-dir", help="write simulate trajectories as CSV here")
    r.add_argument("--jobs", type=int, default=1, help="run checks on this many threads")
    r.set_defaults(func=_cmd_run)

    e = sub.add_parser("export", help="convert a saved JSON report")
    e.add_argument("report")
    e.add_argument("--format", choices=("json", "csv"), default="csv")
    e.add_argument("--out")
    e.set_defaults(func=_cmd_export)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for path, msg in exc.errors:
            print(f"error: {path}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
