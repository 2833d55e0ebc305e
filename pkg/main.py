"""
Command-line application for the stochastic-distance despeckling toolkit.

Subcommands: phantom, corrupt, filter, metrics, montecarlo, report.
Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from errors import SpeckleError
from schemas import FilterConfig, PhantomSpec, check_filter_identifiers
from services.config_service import load_run_config, split_list, write_manifest
from services.export_service import (
    all_comparisons,
    emit_boxplots,
    generate_comparisons_csv,
    generate_csv,
    generate_summary_csv,
    generate_table_csv,
    parse_csv,
    summarize,
)
from services.file_service import read_labels, read_raster, save_raster, write_labels
from services.montecarlo_service import run_protocol
from services.phantom_service import corrupt, generate_phantom, phantom_geometry
from services.quality_metrics import measure
from services.speckle_filters import filter_image

logger = logging.getLogger("despeckle")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _probability(text: str) -> float:
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _count(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return value


def _side(text: str) -> int:
    value = int(text)
    if value < 64 or value % 16:
        raise argparse.ArgumentTypeError(f"must be a multiple of 16 and at least 64, got {text}")
    return value


def _odd_window(text: str) -> int:
    value = int(text)
    if value < 1 or value % 2 == 0:
        raise argparse.ArgumentTypeError(f"must be a positive odd number, got {text}")
    return value


def _filter_list(text: str) -> list[str]:
    try:
        return check_filter_identifiers(split_list(text))
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _looks_list(text: str) -> list[float]:
    try:
        return [float(item) for item in split_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="despeckle", description="Stochastic-distance SAR despeckling toolkit")
    parser.add_argument("--log-level", default=os.environ.get("SPECKLE_LOG_LEVEL", "WARNING"),
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    phantom = commands.add_parser("phantom", help="Write the noise-free phantom and its labels")
    phantom.add_argument("--side", type=_side, default=256)
    phantom.add_argument("--background", type=_positive, default=30.0)
    phantom.add_argument("--line", type=_positive, default=120.0)
    phantom.add_argument("--out", type=Path, required=True, help="Truth raster (.ras or .pgm)")
    phantom.add_argument("--labels", type=Path, required=True, help="Label raster (.lab)")

    corrupt_cmd = commands.add_parser("corrupt", help="Apply Gamma speckle to a raster")
    corrupt_cmd.add_argument("--in", dest="input", type=Path, required=True)
    corrupt_cmd.add_argument("--looks", type=_positive, required=True)
    corrupt_cmd.add_argument("--seed", type=int, default=0)
    corrupt_cmd.add_argument("--out", type=Path, required=True)

    filter_cmd = commands.add_parser("filter", help="Filter a single raster")
    filter_cmd.add_argument("--method", choices=["kl", "lee", "mean"], default="kl")
    filter_cmd.add_argument("--in", dest="input", type=Path, required=True)
    filter_cmd.add_argument("--out", type=Path, required=True)
    filter_cmd.add_argument("--significance", type=_probability, default=0.05)
    filter_cmd.add_argument("--looks", type=_positive, default=1.0, help="Nominal looks (Lee, fixed mode)")
    filter_cmd.add_argument("--looks-mode", choices=["pooled-mle", "fixed"], default="pooled-mle")
    filter_cmd.add_argument("--dedupe", action="store_true", help="Average the deduplicated union of regions")
    filter_cmd.add_argument("--window", type=_odd_window, default=None, help="Lee (3, 5, 7) or mean window side")
    filter_cmd.add_argument("--workers", type=_count, default=1)

    metrics = commands.add_parser("metrics", help="Measure a filtered raster against the phantom")
    metrics.add_argument("--in", dest="input", type=Path, required=True)
    metrics.add_argument("--truth", type=Path, required=True)
    metrics.add_argument("--labels", type=Path, required=True)
    metrics.add_argument("--looks", type=float, default=0.0)
    metrics.add_argument("--filter-name", default="")

    montecarlo = commands.add_parser("montecarlo", help="Run the Monte Carlo protocol")
    montecarlo.add_argument("--config", type=Path, default=None, help="key=value run config file")
    montecarlo.add_argument("--replicates", type=_count, default=None)
    montecarlo.add_argument("--looks", type=_looks_list, default=None)
    montecarlo.add_argument("--filters", type=_filter_list, default=None)
    montecarlo.add_argument("--significance", type=_probability, default=None)
    montecarlo.add_argument("--seed", type=int, default=None)
    montecarlo.add_argument("--side", type=_side, default=None)
    montecarlo.add_argument("--workers", type=_count, default=None)
    montecarlo.add_argument("--looks-mode", choices=["pooled-mle", "fixed"], default=None)
    montecarlo.add_argument("--dedupe", action="store_const", const=True, default=None)
    montecarlo.add_argument("--out", type=Path, required=True, help="Results CSV")

    report = commands.add_parser("report", help="Summarize a results CSV")
    report.add_argument("--in", dest="input", type=Path, required=True)
    report.add_argument("--out", type=Path, required=True, help="Summary CSV")
    report.add_argument("--svg", type=Path, default=None, help="Boxplot SVG")
    report.add_argument("--table", type=Path, default=None, help="One line per (looks, filter)")
    report.add_argument("--compare", type=Path, default=None, help="Paired comparisons CSV")
    return parser


LEE_WINDOWS = (3, 5, 7)


def check_arguments(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    """Cross-option checks argparse cannot express; exits with the usage code."""
    if args.command == "filter" and args.method == "lee" and args.window not in (None, *LEE_WINDOWS):
        parser.error(f"argument --window: Lee accepts 3, 5 or 7, got {args.window}")


def cmd_phantom(args) -> int:
    spec = PhantomSpec(side=args.side, background_mean=args.background, line_mean=args.line)
    truth, labels = generate_phantom(spec)
    save_raster(args.out, truth)
    write_labels(args.labels, labels)
    return EXIT_OK


def cmd_corrupt(args) -> int:
    save_raster(args.out, corrupt(read_raster(args.input), args.looks, args.seed))
    return EXIT_OK


def cmd_filter(args) -> int:
    options = {}
    if args.window is not None:
        options["lee_window" if args.method == "lee" else "mean_window"] = args.window
    config = FilterConfig(
        method=args.method,
        significance=args.significance,
        looks_mode=args.looks_mode,
        nominal_looks=args.looks,
        dedupe=args.dedupe,
        **options,
    )
    save_raster(args.out, filter_image(read_raster(args.input), config, workers=args.workers))
    return EXIT_OK


def cmd_metrics(args) -> int:
    filtered = read_raster(args.input)
    truth = read_raster(args.truth)
    labels = read_labels(args.labels, truth.shape)
    if truth.shape[0] != truth.shape[1]:
        raise SpeckleError(f"phantom rasters are square, got {truth.shape}")
    geometry = phantom_geometry(PhantomSpec(side=truth.shape[0]))
    record = measure(filtered, truth, labels, geometry, looks=args.looks, filter_name=args.filter_name)
    print(record.model_dump_json())
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    overrides = {
        "replicates": args.replicates,
        "looks": args.looks,
        "filters": args.filters,
        "significance": args.significance,
        "seed": args.seed,
        "side": args.side,
        "workers": args.workers,
        "looks_mode": args.looks_mode,
        "dedupe": args.dedupe,
    }
    config = load_run_config(args.config, overrides, output=args.out)
    records = run_protocol(config)
    args.out.write_text(generate_csv(records))
    write_manifest(config, args.out)
    failed = sum(record.failed for record in records)
    if failed:
        print(f"error: {failed} of {len(records)} records failed; see the flags column", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_report(args) -> int:
    records = parse_csv(args.input.read_text())
    rows = summarize(records)
    args.out.write_text(generate_summary_csv(rows))
    if args.table:
        args.table.write_text(generate_table_csv(rows))
    if args.compare:
        args.compare.write_text(generate_comparisons_csv(all_comparisons(records)))
    if args.svg:
        emit_boxplots(records, args.svg)
    return EXIT_OK


COMMANDS = {
    "phantom": cmd_phantom,
    "corrupt": cmd_corrupt,
    "filter": cmd_filter,
    "metrics": cmd_metrics,
    "montecarlo": cmd_montecarlo,
    "report": cmd_report,
}


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run the subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        check_arguments(parser, args)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK

    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SpeckleError, OSError, ValueError) as e:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(cli_dispatch())
