"""
Report command module for scg-emotion.

Re-emits tables, matrices, correlations and summaries from the files of a
previous run without repeating the experiment.
"""

import argparse
import logging
from argparse import Namespace
from pathlib import Path

from app.core.errors import ConfigError, ParseError
from app.core.experiment import EXIT_CONFIG, EXIT_OK
from app.core.report import ReportFormat, emit_report, load_results, results_table
from app.ui.ui import display_results_table, display_written, print_error

# Initialize module logger
logger = logging.getLogger(__name__)


def add_report_arguments(parser: argparse.ArgumentParser) -> None:
    """
    Add arguments for the report command.

    Args:
        parser: ArgumentParser object
    """
    parser.add_argument("--results", type=str, required=True, help="Directory of a previous run")
    parser.add_argument("--out", type=str, required=False,
                        help="Directory for the re-emitted files (default: the results directory)")


def handle_report_command(args: Namespace) -> int:
    """
    Handle the report command.

    Args:
        args: ArgumentParser arguments

    Returns:
        Exit code
    """
    try:
        result = load_results(args.results)
    except (ParseError, ConfigError) as e:
        print_error(str(e))
        return EXIT_CONFIG

    out = Path(args.out) if args.out else Path(args.results)
    written = emit_report(result, out, [ReportFormat.TABLE, ReportFormat.MATRIX])
    display_results_table(results_table(result))
    display_written(written, out)
    return EXIT_OK
