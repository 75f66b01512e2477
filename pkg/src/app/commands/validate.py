"""
Validate command module for scg-emotion.

Loads a dataset in the trial-file schema and checks every trial against the
channels the configured scenarios need.
"""

import argparse
import logging
from argparse import Namespace
from typing import Dict, List, Sequence

from app.core.config import ExperimentConfig, load_config
from app.core.errors import ConfigError, ParseError
from app.core.experiment import EXIT_CONFIG, EXIT_OK
from app.core.models import DatasetFlavor, Scenario, TrialRecord, ValidationFinding, ValidationReport
from app.core.parser import load_dataset
from app.core.validator import MISSING_CHANNEL, validate_trial
from app.ui.ui import display_findings, print_error

# Initialize module logger
logger = logging.getLogger(__name__)


def add_validate_arguments(parser: argparse.ArgumentParser) -> None:
    """
    Add arguments for the validate command.

    Args:
        parser: ArgumentParser object
    """
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=str, help="Experiment configuration naming the dataset")
    source.add_argument("--data", type=str, help="Dataset directory in the trial-file schema")
    parser.add_argument("--flavor", type=str, choices=[f.value for f in DatasetFlavor], default=None,
                        help="Dataset flavor when using --data (default emowear)")


def validate_trials(trials: Sequence[TrialRecord], scenarios: Sequence[Scenario]) -> List[ValidationReport]:
    """One report per trial covering the union of the scenarios' channels."""
    reports = []
    for trial in trials:
        findings: Dict[ValidationFinding, None] = {}
        for scenario in scenarios:
            for finding in validate_trial(trial, scenario).findings:
                findings.setdefault(finding)
        reports.append(ValidationReport(trial.subject_id, trial.video_id, tuple(findings)))
    return reports


def is_schema_problem(finding: ValidationFinding) -> bool:
    """Missing channels are handled by exclusions; corrupt samples are not."""
    return finding.kind != MISSING_CHANNEL


def handle_validate_command(args: Namespace) -> int:
    """
    Handle the validate command.

    Args:
        args: ArgumentParser arguments

    Returns:
        0 when the dataset parses and carries no corrupt signals, 1 otherwise
    """
    try:
        if args.config:
            config = load_config(args.config, {"dataset.flavor": args.flavor})
        else:
            config = ExperimentConfig({"dataset.path": args.data,
                                       "dataset.flavor": args.flavor or DatasetFlavor.EMOWEAR.value})
        if config.dataset_path is None:
            raise ConfigError("no dataset configured (dataset.path)")
        scenarios = config.scenarios
    except ConfigError as e:
        print_error(str(e))
        return EXIT_CONFIG

    try:
        trials = load_dataset(config.dataset_path, config.flavor, config.exclusions_path)
    except ParseError as e:
        logger.debug("Parse failure", exc_info=True)
        display_findings([], [str(e)])
        return EXIT_CONFIG

    reports = validate_trials(trials, scenarios)
    display_findings(reports)
    flagged = sum(t.faulty for t in trials)
    if flagged:
        logger.info("%d trials are flagged faulty and will be excluded", flagged)
    if any(is_schema_problem(f) for r in reports for f in r.findings):
        return EXIT_CONFIG
    return EXIT_OK
