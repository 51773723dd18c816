"""Command-line entry points for the verification suites."""

from __future__ import annotations

import argparse
import json
import sys

from .report import ALL_SUITES, RunConfig, run

SUBCOMMAND_SUITES = {
    "verify-ellipticity": ("ellipticity",),
    "estimate-constants": ("korn", "constants"),
    "solve": ("solve", "limit", "bc"),
    "report": None,  # suites from the config
}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="path to a JSON run configuration")
    sub.add_argument("--kn", type=float, help="Knudsen number override")
    sub.add_argument("--epsilon-w", type=float, dest="epsilon_w", help="velocity prescription strength override")
    sub.add_argument("--degree", type=int, help="polynomial degree override")
    sub.add_argument("--seed", type=int, help="random seed override")
    sub.add_argument("--output-dir", dest="output_dir", help="report output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="r13verify",
        description="Verification suites for the mixed formulation of the linear R13 system",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_SUITES:
        sp = subs.add_parser(name)
        _add_common(sp)
    return parser


def _config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    for key in ("kn", "epsilon_w", "degree", "seed", "output_dir"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    suites = SUBCOMMAND_SUITES[args.command]
    if suites is not None:
        data["suites"] = suites
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    report = run(config)
    jpath, cpath = report.write(config.resolved_output_dir())
    print(f"wrote {jpath} and {cpath}")
    if report.all_passed:
        print(f"all {len(report.rows)} reported quantities pass their criteria")
        return 0
    for row in report.failed_rows():
        tol = "" if row.tolerance is None else f" (tolerance {row.tolerance!r})"
        print(f"FAIL {row.suite}.{row.quantity} = {row.value!r}{tol}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
