"""
Run command module for scg-emotion.

Runs the full experiment described by a configuration file, writes every
result file and prints the results table.
"""

import argparse
import logging
from argparse import Namespace
from typing import Any, Dict, List, Optional

from app.core.config import load_config
from app.core.errors import ConfigError, EmptyDatasetError, ParseError
from app.core.experiment import EXIT_CONFIG, EXIT_FAILED, EXIT_PARTIAL, run_experiment
from app.core.report import emit_report, results_table
from app.ui.ui import console, display_results_table, display_written, print_error

# Initialize module logger
logger = logging.getLogger(__name__)


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    """
    Add arguments for the run command.

    Args:
        parser: ArgumentParser object
    """
    parser.add_argument("--config", type=str, required=True, help="Experiment configuration file")
    parser.add_argument("--seed", type=int, required=False, help="Seed (overrides experiment.seed)")
    parser.add_argument("--out", type=str, required=False, help="Output directory (overrides experiment.output)")
    parser.add_argument("--scenario", type=str, nargs="+", required=False,
                        help="Scenario labels to run, e.g. SCG+ADR BVP+all")
    parser.add_argument("--classifier", type=str, nargs="+", required=False,
                        help="Classifiers to run: NB, SVM, LR")
    parser.add_argument("--jobs", type=int, required=False, help="Parallel worker processes")
    parser.add_argument("--set", type=str, nargs="+", required=False, dest="overrides", metavar="KEY=VALUE",
                        help="Extra configuration values in format section.key=value")
    parser.add_argument("--print-config", action="store_true",
                        help="Print the effective configuration and exit")


def parse_overrides(value_strings: Optional[List[str]]) -> Dict[str, str]:
    """
    Parse configuration overrides in the format KEY=VALUE.

    Raises:
        ConfigError: If a string is not in the correct format
    """
    values = {}
    for val_str in value_strings or []:
        if "=" not in val_str:
            raise ConfigError(f"Invalid override format: {val_str}. Expected KEY=VALUE")
        key, value = val_str.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def command_overrides(args: Namespace) -> Dict[str, Any]:
    """Configuration values set by run flags; flags win over --set."""
    overrides: Dict[str, Any] = parse_overrides(args.overrides)
    flags = {
        "experiment.seed": args.seed,
        "experiment.output": args.out,
        "experiment.jobs": args.jobs,
        "experiment.scenarios": ",".join(args.scenario) if args.scenario else None,
        "classifiers.kinds": ",".join(args.classifier) if args.classifier else None,
    }
    overrides.update({k: v for k, v in flags.items() if v is not None})
    return overrides


def handle_run_command(args: Namespace) -> int:
    """
    Handle the run command.

    Args:
        args: ArgumentParser arguments

    Returns:
        0 on success, 1 on configuration or dataset errors, 2 when some
        subjects failed, 3 when none produced a result
    """
    try:
        config = load_config(args.config, command_overrides(args))
    except ConfigError as e:
        print_error(str(e))
        return EXIT_CONFIG

    if args.print_config:
        console.print(config.to_text(), end="", highlight=False, markup=False)
        return 0

    try:
        result = run_experiment(config)
    except (ConfigError, ParseError, EmptyDatasetError) as e:
        print_error(str(e))
        return EXIT_CONFIG

    written = emit_report(result, config.output)
    display_results_table(results_table(result))
    display_written(written, config.output)
    if result.status == EXIT_PARTIAL:
        console.print("Some subjects failed; see subject_results.tsv", style="warning")
    elif result.status == EXIT_FAILED:
        print_error("no subject produced a result")
    return result.status
