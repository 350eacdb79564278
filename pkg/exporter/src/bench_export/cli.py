"""Command-line entry points: `bench-export export` and `bench-export
verify`."""

from __future__ import annotations

import argparse
import sys

from .exporter import (
    DATASETS,
    EPOCH_POLICY,
    BenchExportError,
    ExportSpec,
    export,
    verify_schema,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench-export",
        description="Export benchmark archives to the neutral accuracy CSV "
                    "and verify emitted files offline.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_export = sub.add_parser("export", help="archive -> CSV")
    p_export.add_argument("archive", help="pickled benchmark archive")
    p_export.add_argument("--dataset", required=True, choices=DATASETS)
    p_export.add_argument("--out", required=True, help="output CSV path")
    p_export.add_argument("--epoch-policy", default=EPOCH_POLICY,
                          help=f"seed aggregation (only {EPOCH_POLICY!r})")

    p_verify = sub.add_parser("verify", help="validate an emitted CSV")
    p_verify.add_argument("path", help="CSV file to check")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.subcommand == "export":
            spec = ExportSpec(args.archive, args.dataset, args.out,
                              args.epoch_policy)
            out = export(spec)
            print(f"wrote {out}")
            return 0
        violations = verify_schema(args.path)
        if violations:
            for violation in violations:
                print(violation, file=sys.stderr)
            print(f"{args.path}: {len(violations)} violation(s)",
                  file=sys.stderr)
            return 1
        print(f"{args.path}: ok")
        return 0
    except BenchExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
