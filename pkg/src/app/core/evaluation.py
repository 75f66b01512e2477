"""
Subject-dependent leave-one-video-out (LOVO) evaluation.

Every fold holds out one trial of a subject, selects features and fits the
classifier on the remaining trials only, and predicts the held-out trial.
The subject's predictions are pooled into one confusion matrix (High is the
positive class) from which accuracy and macro-F1 are computed. Subject scores
are averaged without weights and tested against the best baseline with a
one-sample t-test.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats
from sklearn.metrics import confusion_matrix
from sklearn.model_selection import LeaveOneOut

from app.core.classifiers import (
    BaselineStrategy,
    ClassifierConfig,
    FittedModel,
    baseline_vote,
    fit,
    majority_label,
    predict,
)
from app.core.constants import BASELINE_REPETITIONS, DEFAULT_SEED, STAR_LEVELS, TIE_IS_HIGH
from app.core.errors import (
    DegenerateFitError,
    EmptyEvaluationError,
    EmptySelectionError,
    InsufficientDataError,
    InsufficientSubjectsError,
    InsufficientTrialsError,
    ShapeError,
    SubjectEvaluationError,
    UndefinedScoreError,
)
from app.core.features import DEFAULT_SETTINGS, FeatureSettings, FeatureVector, assemble_features
from app.core.models import BinaryLabel, Dimension, Scenario, TrialRecord
from app.core.selection import SelectionResult, SelectionRule, select_features
from app.core.utils import derive_rng, natural_key
from app.core.validator import trial_label

# Initialize module logger
logger = logging.getLogger(__name__)


class Alternative(str, Enum):
    GREATER = "greater"
    TWO_SIDED = "two-sided"


class SelectionScope(str, Enum):
    """Fit feature selection per LOVO fold, or once on all of a subject's trials."""

    FOLD = "fold"
    SUBJECT = "subject"


# Metrics

@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with High as the positive class."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    def swapped(self) -> "ConfusionMatrix":
        """The same predictions with High and Low exchanged."""
        return ConfusionMatrix(self.tn, self.fn, self.fp, self.tp)


def confusion(predictions: Sequence[int], labels: Sequence[int]) -> ConfusionMatrix:
    """
    Tally predictions against true labels.

    Raises:
        EmptyEvaluationError: If there are no predictions
        ShapeError: If the sequences differ in length
    """
    pred = np.asarray([int(v) for v in predictions], dtype=int)
    true = np.asarray([int(v) for v in labels], dtype=int)
    if pred.shape != true.shape:
        raise ShapeError(f"{pred.size} predictions for {true.size} labels")
    if pred.size == 0:
        raise EmptyEvaluationError("no predictions to evaluate")
    tn, fp, fn, tp = (int(v) for v in confusion_matrix(true, pred, labels=[0, 1]).ravel())
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def class_f1(tp, fp, fn):
    """
    Per-class F1 = 2TP / (2TP + FP + FN), elementwise over arrays.

    NaN when the class was neither predicted nor present, 0 when it was
    present but never predicted (or predicted but never present).
    """
    tp, fp, fn = (np.asarray(v, dtype=float) for v in (tp, fp, fn))
    denominator = 2 * tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denominator > 0, 2 * tp / np.where(denominator > 0, denominator, 1.0), np.nan)


def _macro(tp, fp, fn, tn):
    both = np.stack([class_f1(tp, fp, fn), class_f1(tn, fn, fp)])
    present = ~np.isnan(both)
    counts = present.sum(axis=0)
    return np.where(counts > 0, np.where(present, both, 0.0).sum(axis=0) / np.maximum(counts, 1), np.nan)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyEvaluationError("accuracy of an empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def macro_f1(cm: ConfusionMatrix) -> float:
    """Mean of the High and Low F1 scores, skipping a class absent from both sides."""
    if cm.total == 0:
        raise EmptyEvaluationError("macro-F1 of an empty confusion matrix")
    return float(_macro(cm.tp, cm.fp, cm.fn, cm.tn))


# Folds

@dataclass(frozen=True)
class Fold:
    index: int
    video_id: str
    test_index: int
    train_indices: Tuple[int, ...]


def lovo_folds(trials: Sequence[Union[TrialRecord, str]]) -> List[Fold]:
    """
    One fold per trial, ordered by video identifier.

    Args:
        trials: A subject's trials (or their video identifiers)

    Returns:
        Folds whose test sets partition the trials

    Raises:
        InsufficientTrialsError: If fewer than two trials are given
    """
    video_ids = [t.video_id if isinstance(t, TrialRecord) else str(t) for t in trials]
    if len(video_ids) < 2:
        raise InsufficientTrialsError(f"LOVO needs at least 2 trials, got {len(video_ids)}")
    if len(set(video_ids)) != len(video_ids):
        raise ValueError("video identifiers of a subject must be unique")
    order = np.array(sorted(range(len(video_ids)), key=lambda i: natural_key(video_ids[i])))
    folds = []
    for k, (train, test) in enumerate(LeaveOneOut().split(order)):
        held_out = int(order[test[0]])
        folds.append(Fold(k, video_ids[held_out], held_out, tuple(int(j) for j in order[train])))
    return folds


# Subject evaluation

@dataclass(frozen=True, eq=False)
class SubjectMatrix:
    """A subject's feature matrix (trials x features) and binary labels for one dimension."""

    subject_id: str
    video_ids: Tuple[str, ...]
    feature_names: Tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if features.ndim != 2 or features.shape != (len(self.video_ids), len(self.feature_names)):
            raise ShapeError(f"feature matrix shape {features.shape} does not match "
                             f"{len(self.video_ids)} trials x {len(self.feature_names)} features")
        if labels.shape != (len(self.video_ids),):
            raise ShapeError(f"{labels.size} labels for {len(self.video_ids)} trials")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def with_labels(self, labels: Sequence[int]) -> "SubjectMatrix":
        return SubjectMatrix(self.subject_id, self.video_ids, self.feature_names, self.features, labels)


def subject_matrix(trials: Sequence[TrialRecord], dimension: Dimension,
                   vectors: Sequence[FeatureVector], tie_high: bool = TIE_IS_HIGH) -> SubjectMatrix:
    """Stack per-trial feature vectors of one subject."""
    if not trials:
        raise InsufficientTrialsError("subject has no trials")
    names = vectors[0].names
    for vector in vectors[1:]:
        if vector.names != names:
            raise ShapeError("trials of a subject produced different feature layouts")
    return SubjectMatrix(
        trials[0].subject_id,
        tuple(t.video_id for t in trials),
        names,
        np.vstack([v.values for v in vectors]),
        np.array([int(trial_label(t, dimension, tie_high)) for t in trials]),
    )


@dataclass(frozen=True, eq=False)
class FoldOutcome:
    index: int
    video_id: str
    label: BinaryLabel
    prediction: BinaryLabel
    selected: Tuple[int, ...] = ()
    failure: Optional[str] = None
    parameter_hash: str = ""
    model: Optional[FittedModel] = None

    @property
    def failed(self) -> bool:
        return self.failure is not None


@dataclass(frozen=True, eq=False)
class SubjectResult:
    """Pooled LOVO result of one subject under one setup."""

    subject_id: str
    dimension: Dimension
    scenario: str
    classifier: str
    accuracy: float
    macro_f1: float
    confusion: ConfusionMatrix
    fold_failures: int = 0
    c_param: float = float("nan")
    feature_names: Tuple[str, ...] = ()
    folds: Tuple[FoldOutcome, ...] = field(default_factory=tuple)

    @property
    def setup(self) -> Tuple[str, str, str]:
        return (self.dimension.value, self.scenario, self.classifier)


def parameter_hash(model: FittedModel) -> str:
    """SHA-256 of a fitted model's learned numbers and selected columns."""
    digest = hashlib.sha256(np.ascontiguousarray(model.parameter_vector(), dtype=float).tobytes())
    digest.update(",".join(str(i) for i in model.selected).encode("ascii"))
    return digest.hexdigest()


def _select(features: np.ndarray, labels: np.ndarray, rule: SelectionRule) -> SelectionResult:
    selection = select_features(features, labels, rule)
    if len(selection) == 0:
        raise EmptySelectionError("no feature passed the selection rule")
    return selection


def evaluate_subject(matrix: SubjectMatrix, scenario: str, config: ClassifierConfig,
                     rule: SelectionRule = SelectionRule(),
                     scope: SelectionScope = SelectionScope.FOLD,
                     dimension: Dimension = Dimension.VALENCE,
                     keep_models: bool = False) -> SubjectResult:
    """
    LOVO evaluation of a prepared subject matrix.

    A fold whose training labels hold one class, whose selection comes back
    empty, or whose fit degenerates predicts the training majority and is
    counted as a fold failure.

    Args:
        matrix: Subject features and labels
        scenario: Scenario label recorded on the result
        config: Classifier settings
        rule: Feature selection rule
        scope: Fit selection per fold, or once per subject
        dimension: Dimension the labels belong to
        keep_models: Attach fitted models to the fold outcomes

    Returns:
        Subject result with metrics from the pooled confusion matrix

    Raises:
        InsufficientTrialsError: If the subject has fewer than two trials
        SubjectEvaluationError: If every fold failed
    """
    folds = lovo_folds(list(matrix.video_ids))
    x, y = matrix.features, matrix.labels

    subject_selection: Optional[SelectionResult] = None
    subject_failure: Optional[str] = None
    if SelectionScope(scope) is SelectionScope.SUBJECT:
        try:
            subject_selection = _select(x, y, rule)
        except (UndefinedScoreError, EmptySelectionError) as e:
            subject_failure = str(e)

    outcomes = []
    for fold in folds:
        train = list(fold.train_indices)
        x_train, y_train = x[train], y[train]
        label = BinaryLabel(int(y[fold.test_index]))
        selected: Tuple[int, ...] = ()
        try:
            if subject_failure is not None:
                raise EmptySelectionError(subject_failure)
            if np.unique(y_train).size < 2:
                raise DegenerateFitError("training fold holds a single class")
            selection = subject_selection if subject_selection is not None else _select(x_train, y_train, rule)
            selected = selection.indices
            columns = list(selected)
            model = fit(x_train[:, columns], y_train, config, selected)
            prediction = predict(model, x[fold.test_index, columns])[0]
            outcomes.append(FoldOutcome(fold.index, fold.video_id, label, prediction, selected,
                                        parameter_hash=parameter_hash(model),
                                        model=model if keep_models else None))
        except (UndefinedScoreError, EmptySelectionError, DegenerateFitError) as e:
            logger.debug("Fold %s/%s failed: %s", matrix.subject_id, fold.video_id, e)
            outcomes.append(FoldOutcome(fold.index, fold.video_id, label, majority_label(y_train),
                                        selected, failure=str(e)))

    failures = sum(o.failed for o in outcomes)
    if failures == len(outcomes):
        raise SubjectEvaluationError(f"every fold of subject {matrix.subject_id} failed")
    if failures:
        logger.warning("Subject %s (%s, %s): %d of %d folds fell back to the training majority",
                       matrix.subject_id, scenario, config.label, failures, len(outcomes))

    cm = confusion([o.prediction for o in outcomes], [o.label for o in outcomes])
    return SubjectResult(
        subject_id=matrix.subject_id,
        dimension=Dimension(dimension),
        scenario=scenario,
        classifier=config.label,
        accuracy=accuracy(cm),
        macro_f1=macro_f1(cm),
        confusion=cm,
        fold_failures=failures,
        c_param=config.c_param,
        feature_names=matrix.feature_names,
        folds=tuple(outcomes),
    )


def run_subject(trials: Sequence[TrialRecord], dimension: Dimension, scenario: Scenario,
                config: ClassifierConfig, rule: SelectionRule = SelectionRule(),
                settings: FeatureSettings = DEFAULT_SETTINGS,
                tie_high: bool = TIE_IS_HIGH,
                scope: SelectionScope = SelectionScope.FOLD) -> SubjectResult:
    """
    Assemble a subject's features under a scenario and run LOVO on them.

    Feature extraction is label-free and per trial, so it is done once up
    front; everything fitted on data happens inside the folds.
    """
    vectors = [assemble_features(t, scenario, settings) for t in trials]
    matrix = subject_matrix(trials, dimension, vectors, tie_high)
    return evaluate_subject(matrix, scenario.label, config, rule, scope, dimension)


# Statistics

class TTest(NamedTuple):
    statistic: float
    p_value: float


def one_sample_t_test(scores: Sequence[float], mu0: float,
                      alternative: Alternative = Alternative.GREATER) -> TTest:
    """
    One-sample t-test of the score mean against `mu0`.

    A sample without variance gives t = 0 and the null p-value (0.5 one-sided,
    1 two-sided) when its mean equals `mu0`, and t = +-inf otherwise.

    Args:
        scores: Per-subject scores
        mu0: Reference mean
        alternative: "greater" (upper tail) or "two-sided"

    Returns:
        t statistic and p-value

    Raises:
        InsufficientDataError: If fewer than two scores are given
    """
    x = np.asarray(scores, dtype=float)
    if x.size < 2:
        raise InsufficientDataError(f"t-test needs at least 2 scores, got {x.size}")
    alternative = Alternative(alternative)

    if np.std(x, ddof=1) > 0:
        result = stats.ttest_1samp(x, mu0, alternative=alternative.value)
        return TTest(float(result.statistic), float(result.pvalue))

    logger.warning("t-test on scores without variance")
    diff = float(np.mean(x) - mu0)
    t = 0.0 if diff == 0 else float(np.copysign(np.inf, diff))
    df = x.size - 1
    if alternative is Alternative.TWO_SIDED:
        return TTest(t, float(min(1.0, 2.0 * stats.t.sf(abs(t), df))))
    return TTest(t, float(stats.t.sf(t, df)))


def stars(p_value: float) -> str:
    """Significance marker: * p < 0.05, ** p < 0.01, *** p < 0.001."""
    if p_value is None or np.isnan(p_value):
        return ""
    for level, mark in STAR_LEVELS:
        if p_value < level:
            return mark
    return ""


@dataclass(frozen=True, eq=False)
class AggregateResult:
    """Unweighted subject means and the significance test against a baseline."""

    subject_ids: Tuple[str, ...]
    accuracies: Tuple[float, ...]
    scores: Tuple[float, ...]
    mean_accuracy: float
    mean_macro_f1: float
    t_statistic: float = float("nan")
    p_value: float = float("nan")
    stars: str = ""
    baseline_reference: float = float("nan")
    failed_subjects: Tuple[str, ...] = ()

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)


def aggregate_scores(subject_ids: Sequence[str], accuracies: Sequence[float], scores: Sequence[float],
                     baseline_reference: Optional[float] = None,
                     alternative: Alternative = Alternative.GREATER,
                     failed_subjects: Sequence[str] = ()) -> AggregateResult:
    """Aggregate parallel per-subject score lists; no test when the reference is None."""
    if len(subject_ids) < 2:
        raise InsufficientSubjectsError(f"aggregation needs at least 2 subjects, got {len(subject_ids)}")
    if not len(subject_ids) == len(accuracies) == len(scores):
        raise ShapeError("per-subject lists differ in length")
    t, p, reference = float("nan"), float("nan"), float("nan")
    if baseline_reference is not None:
        reference = float(baseline_reference)
        t, p = one_sample_t_test(scores, reference, alternative)
    return AggregateResult(
        subject_ids=tuple(subject_ids),
        accuracies=tuple(float(a) for a in accuracies),
        scores=tuple(float(s) for s in scores),
        mean_accuracy=float(np.mean(accuracies)),
        mean_macro_f1=float(np.mean(scores)),
        t_statistic=float(t),
        p_value=float(p),
        stars=stars(p),
        baseline_reference=reference,
        failed_subjects=tuple(failed_subjects),
    )


def aggregate(results: Sequence[SubjectResult], baseline_reference: Optional[float],
              alternative: Alternative = Alternative.GREATER,
              failed_subjects: Sequence[str] = ()) -> AggregateResult:
    """
    Mean accuracy and macro-F1 over subjects, macro-F1 tested against the baseline.

    Raises:
        InsufficientSubjectsError: If fewer than two subjects are given
    """
    return aggregate_scores(
        [r.subject_id for r in results],
        [r.accuracy for r in results],
        [r.macro_f1 for r in results],
        baseline_reference,
        alternative,
        failed_subjects,
    )


# Baselines

def expected_baseline_scores(labels: Sequence[int], strategy: BaselineStrategy) -> Tuple[float, float]:
    """
    Closed-form accuracy and macro-F1 of a voting strategy on one subject.

    Expected confusion counts are plugged into the metric formulas, so the
    F1 values are the large-sample limits: Random p/(p+1/2) and
    (1-p)/(3/2-p) averaged, Majority q/(1+q) with q the majority fraction,
    Ratio 1/2. Expected accuracies are exact: 1/2, q and p^2 + (1-p)^2.
    """
    y = np.asarray([int(v) for v in labels], dtype=int)
    if y.size == 0:
        raise EmptyEvaluationError("baseline expectations need at least one label")
    p = float(y.mean())
    strategy = BaselineStrategy(strategy)
    if strategy is BaselineStrategy.RANDOM:
        tp, fp, fn, tn = 0.5 * p, 0.5 * (1 - p), 0.5 * p, 0.5 * (1 - p)
    elif strategy is BaselineStrategy.MAJORITY:
        if majority_label(y) is BinaryLabel.HIGH:
            tp, fp, fn, tn = p, 1 - p, 0.0, 0.0
        else:
            tp, fp, fn, tn = 0.0, 0.0, p, 1 - p
    else:
        tp, fp, fn, tn = p * p, (1 - p) * p, p * (1 - p), (1 - p) * (1 - p)
    return float(tp + tn), float(_macro(tp, fp, fn, tn))


def simulate_baseline(labels: Sequence[int], strategy: BaselineStrategy, rng: np.random.Generator,
                      repetitions: int = BASELINE_REPETITIONS) -> Tuple[float, float]:
    """Mean accuracy and macro-F1 of a strategy over seeded repeated votes."""
    y = np.asarray([int(v) for v in labels], dtype=int)
    strategy = BaselineStrategy(strategy)
    reps = 1 if strategy is BaselineStrategy.MAJORITY else repetitions
    votes = baseline_vote(strategy, y, reps * y.size, rng)
    pred = np.fromiter((int(v) for v in votes), dtype=int, count=reps * y.size).reshape(reps, y.size)
    tp = np.sum((pred == 1) & (y == 1), axis=1)
    fp = np.sum((pred == 1) & (y == 0), axis=1)
    fn = np.sum((pred == 0) & (y == 1), axis=1)
    tn = np.sum((pred == 0) & (y == 0), axis=1)
    return float(np.mean((tp + tn) / y.size)), float(np.mean(_macro(tp, fp, fn, tn)))


def run_baselines(subject_labels: Mapping[str, Sequence[int]], dimension: Dimension,
                  seed: int = DEFAULT_SEED, repetitions: int = BASELINE_REPETITIONS
                  ) -> Dict[BaselineStrategy, AggregateResult]:
    """
    Voting baselines per subject, aggregated like classifier results.

    Each strategy is fitted on a subject's full label list and votes once per
    trial; Random and Ratio average `repetitions` draws from a stream keyed
    by (seed, subject, dimension, strategy).

    Args:
        subject_labels: Binary labels per subject
        dimension: Dimension the labels belong to (part of the stream key)
        seed: Experiment seed
        repetitions: Number of simulated voting rounds

    Returns:
        Aggregate per strategy, without a significance test
    """
    subjects = sorted(subject_labels, key=natural_key)
    results = {}
    for strategy in BaselineStrategy:
        accuracies, scores = [], []
        for subject in subjects:
            rng = derive_rng(seed, "baseline", subject, Dimension(dimension).value, strategy.value)
            acc, f1 = simulate_baseline(subject_labels[subject], strategy, rng, repetitions)
            accuracies.append(acc)
            scores.append(f1)
        results[strategy] = aggregate_scores(subjects, accuracies, scores)
    return results


def best_baseline_reference(baselines: Mapping[BaselineStrategy, AggregateResult]) -> float:
    """Highest mean macro-F1 among the voting strategies."""
    return max(result.mean_macro_f1 for result in baselines.values())
