"""Command-line entry point: ``recallscore validate|run|plot-data|diff``.

Exit codes: 0 ok, 2 validation error, 3 provider failure, 4 diff exceeds tolerance.
API keys are read from environment variables only.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import (
    DimMismatch,
    ManifestError,
    ProviderUnavailable,
    SchemaMismatch,
    UnparseableReply,
)
from .manifest import validate_manifest
from .pipeline import REPORT_NAME, run
from .plotdata import emit_plot_data
from .report import diff_reports, load_report

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PROVIDER = 3
EXIT_DIFF = 4

logger = logging.getLogger("recallscore")


def _segment_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _overrides(args) -> dict:
    out = {}
    if args.segments is not None:
        out["segment_counts"] = args.segments
    for name in ("overlap", "mode", "chance", "isc", "seed", "workers"):
        value = getattr(args, name)
        if value is not None:
            out[name] = value
    if args.diagonal_only:
        out["diagonal_only"] = True
    if args.rating_chance:
        out["rating_chance"] = True
    if args.isc_dumps:
        out["isc_dumps"] = True
    if args.provider_config:
        providers = json.loads(Path(args.provider_config).read_text(encoding="utf-8"))
        out["providers"] = providers
    if args.diagonal_only and "providers" in out and "rater" in out["providers"]:
        out["providers"]["rater"]["diagonal_only"] = True
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recallscore", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a study manifest")
    p.add_argument("manifest")

    p = sub.add_parser("run", help="score a study")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--segments", type=_segment_list, help="segment counts, e.g. 6,10,14,18")
    p.add_argument("--overlap", type=float)
    p.add_argument("--mode", choices=["embedding", "rating", "both"])
    p.add_argument("--chance", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--rating-chance", action="store_true", help="also rate chance control matrices")
    p.add_argument("--isc", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--isc-dumps", action="store_true", help="write every recall x recall matrix")
    p.add_argument("--diagonal-only", action="store_true", help="rate only diagonal cells")
    p.add_argument("--provider-config", help="JSON file with 'embedding' and/or 'rater' blocks")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--plot", action="store_true", help="also write plot data and figures to OUT/plots")

    p = sub.add_parser("plot-data", help="export group-mean matrices, CSV tables and figures")
    p.add_argument("report", help="report.json or the run directory containing it")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("diff", help="compare two reports")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tolerance", type=float, default=0.0)
    p.add_argument("--max-lines", type=int, default=50)
    return parser


def _report_path(arg: str) -> Path:
    path = Path(arg)
    return path / REPORT_NAME if path.is_dir() else path


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.command == "validate":
        try:
            m = validate_manifest(args.manifest)
        except ManifestError as exc:
            print(exc, file=sys.stderr)
            return EXIT_VALIDATION
        print(f"ok: {len(m.participants)} participants, {len(m.story_ids)} stories, {len(m.recalls)} recalls")
        return EXIT_OK

    if args.command == "run":
        try:
            manifest = validate_manifest(args.manifest, _overrides(args))
        except (ManifestError, OSError, json.JSONDecodeError) as exc:
            print(exc, file=sys.stderr)
            return EXIT_VALIDATION
        try:
            report = run(manifest, args.out)
        except (ProviderUnavailable, UnparseableReply, DimMismatch) as exc:
            print(f"provider failure: {exc}", file=sys.stderr)
            print(f"partial results kept under {Path(args.out) / 'partial'}", file=sys.stderr)
            return EXIT_PROVIDER
        print(f"wrote {Path(args.out) / REPORT_NAME} ({len(report['results'])} scored recalls)")
        if args.plot:
            files = emit_plot_data(report, Path(args.out) / "plots", args.out)
            print(f"wrote {len(files)} plot files to {Path(args.out) / 'plots'}")
        return EXIT_OK

    if args.command == "plot-data":
        path = _report_path(args.report)
        files = emit_plot_data(load_report(path), args.out, path.parent, figures=not args.no_figures)
        print(f"wrote {len(files)} files to {args.out}")
        return EXIT_OK

    if args.command == "diff":
        try:
            diffs = diff_reports(load_report(_report_path(args.a)), load_report(_report_path(args.b)), args.tolerance)
        except SchemaMismatch as exc:
            print(f"schema mismatch: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        for d in diffs[: args.max_lines]:
            print(d)
        if len(diffs) > args.max_lines:
            print(f"... {len(diffs) - args.max_lines} more")
        if diffs:
            print(f"{len(diffs)} difference(s) above tolerance {args.tolerance}")
            return EXIT_DIFF
        print("reports match")
        return EXIT_OK
    return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
