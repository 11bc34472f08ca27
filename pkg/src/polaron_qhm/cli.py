"""
Command-line interface for polaron-qhm
"""

import argparse
import logging
import sys

from polaron_qhm.version import __version__

SPECTRUM_CHOICES = ("g1", "g2", "g2-terms", "weak-cold", "weak-hot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polaron-qhm",
        description="polaron-qhm - strongly coupled quantum heat machine simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        choices=["debug", "info", "warning", "error"],
        default="info",
        help="Set the logging level (default: info)",
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config value by dotted path, e.g. cold.xi=0.5 (repeatable)",
    )
    common.add_argument("--output", help="Write the table to this file instead of stdout")

    commands = parser.add_subparsers(dest="command", required=True)
    spectrum = commands.add_parser(
        "spectrum", parents=[common], help="Print the line spectra of one channel"
    )
    spectrum.add_argument(
        "--which",
        choices=SPECTRUM_CHOICES,
        default="g1",
        help="Spectrum to print (default: g1)",
    )
    commands.add_parser(
        "steady", parents=[common], help="Solve the steady state at the configured point"
    )
    sweep = commands.add_parser(
        "sweep", parents=[common], help="Run the configured sweep and write CSV/SVG"
    )
    sweep.add_argument("--svg", help="Also plot the configured column to this SVG file")
    commands.add_parser(
        "check", parents=[common], help="Run the invariant suite (exit 3 on violation)"
    )
    return parser


def main(argv=None):
    """Main entry point for the polaron-qhm command."""
    args = build_parser().parse_args(argv)

    # Configure logging
    log_level = getattr(logging, args.log_level.upper())

    # Root logger stays at WARNING; stdout is reserved for CSV tables
    logging.basicConfig(
        level=logging.WARNING,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )

    # Set our specific logger to the requested level
    logger = logging.getLogger("polaron_qhm.main")
    logger.setLevel(log_level)

    # Suppress numexpr thread-count logs pulled in by pandas
    logging.getLogger("numexpr").setLevel(logging.WARNING)

    from .main import run_command

    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())

# Copyright (c) 2025 AMD
