"""
Experiment orchestration: exclusions, per-subject LOVO over every setup,
baselines, aggregation and correlation.

A setup is one (dimension, scenario, classifier) combination. Subjects are
the unit of parallel work; results are merged in natural subject order so
serial and parallel runs produce the same tables.
"""

import logging
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.__version__ import __version__
from app.core.classifiers import BaselineStrategy, ClassifierConfig
from app.core.config import ExperimentConfig
from app.core.correlation import CorrelationCell, pearson_matrix
from app.core.errors import EmptyDatasetError, InsufficientDataError, ScgEmotionError
from app.core.evaluation import (
    AggregateResult,
    SelectionScope,
    SubjectResult,
    aggregate,
    best_baseline_reference,
    evaluate_subject,
    expected_baseline_scores,
    run_baselines,
    subject_matrix,
)
from app.core.features import FeatureSettings, FeatureVector, channel_features, extended_for
from app.core.models import Channel, Dimension, Scenario, TrialRecord
from app.core.parser import load_dataset
from app.core.selection import SelectionRule
from app.core.utils import natural_key, progress_bar
from app.core.validator import ExclusionReport, apply_exclusions, group_by_subject, trial_label

# Initialize module logger
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_FAILED = 3


@dataclass(frozen=True)
class Setup:
    dimension: Dimension
    scenario: str
    classifier: str

    @property
    def identifier(self) -> str:
        """Column name of the setup in per-subject matrices."""
        return f"{self.dimension.value}|{self.scenario}|{self.classifier}"


@dataclass
class SetupOutcome:
    """Results of every subject under one setup, at the chosen C."""

    setup: Setup
    c_param: float
    results: List[SubjectResult] = field(default_factory=list)
    failed_subjects: List[str] = field(default_factory=list)
    aggregate: Optional[AggregateResult] = None
    sweep: Dict[float, float] = field(default_factory=dict)

    def score_of(self, subject_id: str) -> float:
        for result in self.results:
            if result.subject_id == subject_id:
                return result.macro_f1
        return float("nan")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    subjects: List[str]
    exclusions: ExclusionReport
    setups: List[SetupOutcome]
    baselines: Dict[Dimension, Dict[BaselineStrategy, AggregateResult]]
    expected_baselines: Dict[Dimension, Dict[BaselineStrategy, Tuple[float, float]]]
    correlations: Dict[Dimension, Tuple[List[str], List[List[CorrelationCell]]]]
    status: int = EXIT_OK

    def manifest(self) -> "OrderedDict[str, object]":
        """Run description; contains nothing that varies between identical runs."""
        return OrderedDict([
            ("software", "scg-emotion"),
            ("version", __version__),
            ("config_hash", self.config.config_hash),
            ("seed", self.config.seed),
            ("flavor", self.config.flavor.value),
            ("subjects", len(self.subjects)),
            ("excluded_subjects", self.exclusions.excluded_subjects),
            ("setups", len(self.setups)),
            ("failed_setups", sum(o.aggregate is None for o in self.setups)),
            ("subject_failures", sum(len(o.failed_subjects) for o in self.setups)),
            ("status", self.status),
        ])


# Per-subject work

@dataclass(frozen=True)
class SubjectTask:
    subject_id: str
    trials: Tuple[TrialRecord, ...]
    scenarios: Tuple[Scenario, ...]
    dimensions: Tuple[Dimension, ...]
    classifiers: Tuple[ClassifierConfig, ...]
    rule: SelectionRule
    scope: SelectionScope
    settings: FeatureSettings
    tie_high: bool
    keep_models: bool = False


# (dimension, scenario label, classifier label, C) -> result or failure message
SubjectOutcome = Dict[Tuple[Dimension, str, str, float], object]


def scenario_vectors(trials: Sequence[TrialRecord], scenarios: Sequence[Scenario],
                     settings: FeatureSettings) -> Dict[str, List[FeatureVector]]:
    """
    Feature vectors of every trial under every scenario.

    Each channel of a trial is extracted once and shared by all scenarios
    that use it.
    """
    cache: Dict[Tuple[int, Channel, bool], FeatureVector] = {}
    vectors: Dict[str, List[FeatureVector]] = OrderedDict()
    for scenario in scenarios:
        extended = extended_for(scenario, settings)
        rows = []
        for i, trial in enumerate(trials):
            parts = []
            for channel in scenario.channels():
                key = (i, channel, extended)
                if key not in cache:
                    cache[key] = channel_features(trial, channel, extended, settings)
                parts.append(cache[key])
            rows.append(FeatureVector.concat(parts))
        vectors[scenario.label] = rows
    return vectors


def evaluate_subject_task(task: SubjectTask) -> SubjectOutcome:
    """Run every setup and C value for one subject."""
    outcome: SubjectOutcome = {}
    try:
        vectors = scenario_vectors(task.trials, task.scenarios, task.settings)
    except ScgEmotionError as e:
        logger.warning("Subject %s: feature extraction failed: %s", task.subject_id, e)
        for dimension in task.dimensions:
            for scenario in task.scenarios:
                for config in task.classifiers:
                    outcome[(dimension, scenario.label, config.label, config.c_param)] = str(e)
        return outcome

    for dimension in task.dimensions:
        for scenario in task.scenarios:
            matrix = subject_matrix(list(task.trials), dimension, vectors[scenario.label], task.tie_high)
            for config in task.classifiers:
                key = (dimension, scenario.label, config.label, config.c_param)
                try:
                    outcome[key] = evaluate_subject(matrix, scenario.label, config, task.rule, task.scope,
                                                    dimension, task.keep_models)
                except ScgEmotionError as e:
                    logger.warning("Subject %s failed under %s/%s/%s: %s",
                                   task.subject_id, dimension.value, scenario.label, config.label, e)
                    outcome[key] = str(e)
    return outcome


def _map_subjects(tasks: List[SubjectTask], jobs: int) -> List[SubjectOutcome]:
    outcomes = []
    with progress_bar("Evaluating subjects", len(tasks)) as advance:
        if jobs <= 1 or len(tasks) <= 1:
            for task in tasks:
                outcomes.append(evaluate_subject_task(task))
                advance()
        else:
            with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as executor:
                # map() yields in submission order, whatever order workers finish in
                for outcome in executor.map(evaluate_subject_task, tasks):
                    outcomes.append(outcome)
                    advance()
    return outcomes


# Merging

def _best_c(per_c: Dict[float, List[SubjectResult]]) -> float:
    best, best_score = None, -np.inf
    for c_param in sorted(per_c):
        results = per_c[c_param]
        score = float(np.mean([r.macro_f1 for r in results])) if results else -np.inf
        if score > best_score:
            best, best_score = c_param, score
    return best if best is not None else sorted(per_c)[0]


def _merge(subjects: List[str], outcomes: List[SubjectOutcome], config: ExperimentConfig) -> List[SetupOutcome]:
    setups = []
    for dimension in config.dimensions:
        for scenario in config.scenarios:
            for kind in config.classifier_kinds:
                label = kind.value
                grid = config.c_candidates(kind)
                per_c: Dict[float, List[SubjectResult]] = {c: [] for c in grid}
                failed: Dict[float, List[str]] = {c: [] for c in grid}
                for subject, outcome in zip(subjects, outcomes):
                    for c_param in grid:
                        value = outcome.get((dimension, scenario.label, label, c_param))
                        if isinstance(value, SubjectResult):
                            per_c[c_param].append(value)
                        else:
                            failed[c_param].append(subject)
                chosen = _best_c(per_c)
                sweep = {c: float(np.mean([r.macro_f1 for r in per_c[c]])) if per_c[c] else float("nan")
                         for c in grid} if len(grid) > 1 else {}
                setups.append(SetupOutcome(Setup(dimension, scenario.label, label), chosen,
                                           per_c[chosen], failed[chosen], sweep=sweep))
    return setups


def setup_correlations(setups: Sequence[SetupOutcome], dimension: Dimension):
    """Pearson matrix of per-subject F1 between the setups of one dimension."""
    chosen = [o for o in setups if o.setup.dimension is dimension and o.results]
    if not chosen:
        return [], []
    common = set.intersection(*({r.subject_id for r in o.results} for o in chosen))
    subjects = sorted(common, key=natural_key)
    scores = OrderedDict((o.setup.identifier, [o.score_of(s) for s in subjects]) for o in chosen)
    try:
        return pearson_matrix(scores)
    except InsufficientDataError as e:
        logger.warning("No %s correlation matrix: %s", dimension.value, e)
        return [], []


def run_experiment(config: ExperimentConfig, trials: Optional[Sequence[TrialRecord]] = None,
                   keep_models: Optional[bool] = None) -> ExperimentResult:
    """
    Run the full protocol.

    Args:
        config: Effective configuration
        trials: Pre-loaded trials (the configured dataset is loaded when None)
        keep_models: Keep fitted fold models for dumps (defaults to report.models)

    Returns:
        Experiment result; its status is 0, 2 (some subjects failed) or 3
        (no subject produced a result)

    Raises:
        ParseError: If the dataset cannot be loaded
        EmptyDatasetError: If nothing survives the exclusions
    """
    if trials is None:
        if config.dataset_path is None:
            raise EmptyDatasetError("no dataset configured (dataset.path)")
        trials = load_dataset(config.dataset_path, config.flavor, config.exclusions_path)
    scenarios = config.scenarios
    kept, exclusions = apply_exclusions(trials, config["labels.min_class_fraction"], scenarios, config.tie_high)
    by_subject = group_by_subject(kept)
    subjects = sorted(by_subject, key=natural_key)
    logger.info("Evaluating %d subjects, %d scenarios, %d classifiers",
                len(subjects), len(scenarios), len(config.classifier_kinds))

    classifiers = tuple(c for kind in config.classifier_kinds for c in config.classifier_grid(kind))
    keep = config["report.models"] if keep_models is None else keep_models
    tasks = [
        SubjectTask(
            subject_id=s,
            trials=tuple(sorted(by_subject[s], key=lambda t: natural_key(t.video_id))),
            scenarios=tuple(scenarios),
            dimensions=tuple(config.dimensions),
            classifiers=classifiers,
            rule=config.selection_rule,
            scope=config.selection_scope,
            settings=config.feature_settings,
            tie_high=config.tie_high,
            keep_models=keep,
        )
        for s in subjects
    ]
    setups = _merge(subjects, _map_subjects(tasks, config.jobs), config)

    baselines, expected, correlations = {}, {}, {}
    for dimension in config.dimensions:
        labels = OrderedDict((s, [int(trial_label(t, dimension, config.tie_high)) for t in by_subject[s]])
                             for s in subjects)
        if len(subjects) >= 2:
            baselines[dimension] = run_baselines(labels, dimension, config.seed, config["baselines.repetitions"])
        expected[dimension] = {
            strategy: tuple(float(np.mean(v)) for v in zip(*(expected_baseline_scores(y, strategy)
                                                             for y in labels.values())))
            for strategy in BaselineStrategy
        }
        reference = best_baseline_reference(baselines[dimension]) if dimension in baselines else None
        for outcome in setups:
            if outcome.setup.dimension is not dimension:
                continue
            if len(outcome.results) >= 2 and reference is not None:
                outcome.aggregate = aggregate(outcome.results, reference, config.alternative,
                                              outcome.failed_subjects)
            else:
                logger.warning("Setup %s has %d subject results; no aggregate",
                               outcome.setup.identifier, len(outcome.results))
        correlations[dimension] = setup_correlations(setups, dimension)

    if not any(o.results for o in setups):
        status = EXIT_FAILED
    elif any(o.failed_subjects for o in setups):
        status = EXIT_PARTIAL
    else:
        status = EXIT_OK
    logger.info("Experiment finished with status %d", status)
    return ExperimentResult(config, subjects, exclusions, setups, baselines, expected, correlations, status)
