"""
Main command-line interface for scg-emotion.
"""

import logging
import sys
import traceback
from argparse import ArgumentParser
from typing import List, Optional

from rich.logging import RichHandler

from app.__version__ import __version__
from app.commands.report import add_report_arguments, handle_report_command
from app.commands.run import add_run_arguments, handle_run_command
from app.commands.synth import add_synth_arguments, handle_synth_command
from app.commands.validate import add_validate_arguments, handle_validate_command
from app.core.experiment import EXIT_FAILED
from app.core.utils import console as error_console
from app.ui.ui import print_error

HANDLERS = {
    "validate": handle_validate_command,
    "synth": handle_synth_command,
    "run": handle_run_command,
    "report": handle_report_command,
}


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """
    Send log records to stderr through rich.

    Args:
        verbose: Log DEBUG records
        quiet: Log WARNING and above only
    """
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=error_console, show_path=verbose, rich_tracebacks=True)],
        force=True,
    )


def build_argument_parser() -> ArgumentParser:
    """
    Build the argument parser for the command-line interface.

    Returns:
        ArgumentParser object
    """
    parser = ArgumentParser(prog="scg-emotion",
                            description="Single-trial valence/arousal classification from physiological signals")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    subparsers = parser.add_subparsers(dest="command")

    # Dataset check command
    validate_parser = subparsers.add_parser("validate", help="check a dataset against the trial-file schema")
    add_validate_arguments(validate_parser)

    # Synthetic data command
    synth_parser = subparsers.add_parser("synth", help="generate a synthetic dataset")
    add_synth_arguments(synth_parser)

    # Experiment command
    run_parser = subparsers.add_parser("run", help="run the classification experiment")
    add_run_arguments(run_parser)

    # Report command
    report_parser = subparsers.add_parser("report", help="re-emit result files from a previous run")
    add_report_arguments(report_parser)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the command-line interface."""
    parser = build_argument_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    handler = HANDLERS.get(args.command)
    if handler is None:
        parser.print_help()
        return 0
    try:
        return handler(args)
    except KeyboardInterrupt:
        print_error("interrupted")
        return EXIT_FAILED
    except Exception as e:
        print_error(str(e))
        traceback.print_exc()
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
