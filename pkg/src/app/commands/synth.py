"""
Synth command module for scg-emotion.

Generates a synthetic dataset from the ``synthetic.*`` configuration keys and
writes it in the trial-file schema together with its ground truth.
"""

import argparse
import logging
from argparse import Namespace
from pathlib import Path

from app.core.config import ExperimentConfig, load_config
from app.core.errors import ConfigError, SyntheticSpecError
from app.core.experiment import EXIT_CONFIG, EXIT_OK
from app.core.parser import write_dataset
from app.core.synthetic import generate_synthetic_dataset, truth_frame
from app.ui.ui import console, print_error

# Initialize module logger
logger = logging.getLogger(__name__)

GROUND_TRUTH_FILE = "ground_truth.tsv"


def add_synth_arguments(parser: argparse.ArgumentParser) -> None:
    """
    Add arguments for the synth command.

    Args:
        parser: ArgumentParser object
    """
    parser.add_argument("--config", type=str, required=False,
                        help="Configuration with synthetic.* keys (defaults when omitted)")
    parser.add_argument("--out", type=str, required=True, help="Output dataset directory")
    parser.add_argument("--seed", type=int, required=False, help="Seed (overrides experiment.seed)")


def handle_synth_command(args: Namespace) -> int:
    """
    Handle the synth command.

    Args:
        args: ArgumentParser arguments

    Returns:
        Exit code
    """
    try:
        overrides = {"experiment.seed": args.seed}
        if args.config:
            config = load_config(args.config, overrides)
        else:
            config = ExperimentConfig({k: v for k, v in overrides.items() if v is not None})
        dataset = generate_synthetic_dataset(config.synthetic_spec, config.seed)
    except (ConfigError, SyntheticSpecError) as e:
        print_error(str(e))
        return EXIT_CONFIG

    root = write_dataset(dataset.trials, Path(args.out))
    truth_frame(dataset.truth).to_csv(root / GROUND_TRUTH_FILE, sep="\t", index=False,
                                      float_format="%.10g", lineterminator="\n")
    subjects = len({t.subject_id for t in dataset.trials})
    console.print(f"Wrote {len(dataset)} trials of {subjects} subjects to {root} "
                  f"(flavor {config['synthetic.flavor']}, seed {config.seed})", style="secondary")
    return EXIT_OK
