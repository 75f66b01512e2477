"""
Module for validating trials, binarizing ratings and applying exclusions.

Exclusion runs in three passes: faulty-flagged trials are dropped, subjects
whose required channels are missing or corrupt are dropped, and finally
subjects with too few High or Low ratings in either dimension are dropped.
"""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.constants import MIN_CLASS_FRACTION, RATING_MAX, RATING_MID_THRESHOLD, RATING_MIN, TIE_IS_HIGH
from app.core.errors import EmptyDatasetError, InvalidRatingError
from app.core.models import (
    BinaryLabel,
    Channel,
    Dimension,
    IrregularSignal,
    Scenario,
    TrialRecord,
    UniformSignal,
    ValidationFinding,
    ValidationReport,
)

# Initialize module logger
logger = logging.getLogger(__name__)

MISSING_CHANNEL = "missing-channel"
NON_FINITE = "non-finite"
EMPTY_SIGNAL = "zero-length"
NON_MONOTONE = "non-monotone-timestamps"


def binarize_rating(rating: float, dimension: Dimension, tie_high: bool = TIE_IS_HIGH) -> BinaryLabel:
    """
    Binarize a SAM rating at the mid-threshold of the 1-9 scale.

    Args:
        rating: Rating in [1, 9]
        dimension: Dimension the rating belongs to (both use the same threshold)
        tie_high: Whether a rating of exactly 5 counts as High

    Returns:
        High if the rating is above the threshold, Low otherwise

    Raises:
        InvalidRatingError: If the rating is non-finite or out of range
    """
    value = float(rating)
    if not math.isfinite(value) or not RATING_MIN <= value <= RATING_MAX:
        raise InvalidRatingError(f"{Dimension(dimension).value} rating {rating} outside [1, 9]")
    if value > RATING_MID_THRESHOLD or (tie_high and value == RATING_MID_THRESHOLD):
        return BinaryLabel.HIGH
    return BinaryLabel.LOW


def trial_label(trial: TrialRecord, dimension: Dimension, tie_high: bool = TIE_IS_HIGH) -> BinaryLabel:
    """Binarized label of a trial for one dimension."""
    return binarize_rating(trial.ratings.rating(dimension), dimension, tie_high)


def _signal_findings(channel: Channel, signal) -> List[ValidationFinding]:
    findings = []
    values = signal.samples if isinstance(signal, UniformSignal) else signal.values
    if len(values) == 0:
        return [ValidationFinding(EMPTY_SIGNAL, channel, "signal has no samples")]
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        findings.append(ValidationFinding(
            NON_FINITE, channel, f"{bad.size} non-finite samples, first at index {bad[0]}", int(bad[0])
        ))
    if isinstance(signal, IrregularSignal):
        steps = np.diff(signal.timestamps)
        broken = np.flatnonzero(~(steps > 0))
        if broken.size:
            findings.append(ValidationFinding(
                NON_MONOTONE, channel, f"timestamps not increasing at index {broken[0] + 1}", int(broken[0] + 1)
            ))
        bad_times = np.flatnonzero(~np.isfinite(signal.timestamps))
        if bad_times.size:
            findings.append(ValidationFinding(
                NON_FINITE, channel, f"non-finite timestamp at index {bad_times[0]}", int(bad_times[0])
            ))
    return findings


def validate_trial(trial: TrialRecord, scenario: Optional[Scenario] = None) -> ValidationReport:
    """
    Check a trial against the channels a scenario needs.

    Args:
        trial: Trial to inspect (never modified)
        scenario: Scenario whose required channels must be present; when None
            only the channels the trial carries are inspected

    Returns:
        Report listing missing channels, non-finite samples, empty signals and
        timestamp monotonicity violations
    """
    findings: List[ValidationFinding] = []
    required = scenario.required_channels() if scenario is not None else []
    for channel in required:
        if channel not in trial.channels:
            findings.append(ValidationFinding(MISSING_CHANNEL, channel, f"{channel.value} not recorded"))
    inspected = required if scenario is not None else sorted(trial.channels, key=lambda c: c.value)
    for channel in inspected:
        if channel in trial.channels:
            findings.extend(_signal_findings(channel, trial.channels[channel]))
    return ValidationReport(trial.subject_id, trial.video_id, tuple(findings))


@dataclass(frozen=True)
class Exclusion:
    subject_id: str
    video_id: Optional[str]
    reason: str


@dataclass
class ExclusionReport:
    """Every removal made by apply_exclusions, in the order it was decided."""

    removals: List[Exclusion] = field(default_factory=list)
    kept_subjects: List[str] = field(default_factory=list)

    @property
    def excluded_subjects(self) -> List[str]:
        return sorted({r.subject_id for r in self.removals if r.video_id is None})

    @property
    def excluded_trials(self) -> List[Tuple[str, str]]:
        return [(r.subject_id, r.video_id) for r in self.removals if r.video_id is not None]

    def to_rows(self) -> List[Dict[str, str]]:
        return [
            {"subject_id": r.subject_id, "video_id": r.video_id or "*", "reason": r.reason}
            for r in self.removals
        ]


def group_by_subject(dataset: Iterable[TrialRecord]) -> "OrderedDict[str, List[TrialRecord]]":
    """Group trials by subject, preserving first-appearance order."""
    grouped: "OrderedDict[str, List[TrialRecord]]" = OrderedDict()
    for trial in dataset:
        grouped.setdefault(trial.subject_id, []).append(trial)
    return grouped


def class_fractions(trials: Sequence[TrialRecord], dimension: Dimension,
                    tie_high: bool = TIE_IS_HIGH) -> Tuple[float, float]:
    """Fractions of (High, Low) labels among the trials."""
    if not trials:
        return (0.0, 0.0)
    high = sum(trial_label(t, dimension, tie_high) is BinaryLabel.HIGH for t in trials)
    return (high / len(trials), (len(trials) - high) / len(trials))


def apply_exclusions(dataset: Sequence[TrialRecord],
                     min_class_fraction: float = MIN_CLASS_FRACTION,
                     scenarios: Sequence[Scenario] = (),
                     tie_high: bool = TIE_IS_HIGH) -> Tuple[List[TrialRecord], ExclusionReport]:
    """
    Apply the trial and subject exclusion criteria.

    Args:
        dataset: All trials
        min_class_fraction: Minimum share of High and of Low ratings per dimension
        scenarios: Scenarios whose required channels every trial must carry intact
        tie_high: Rating tie rule used when binarizing

    Returns:
        Tuple of (kept trials in input order, exclusion report)

    Raises:
        ValueError: If min_class_fraction is outside (0, 0.5]
        EmptyDatasetError: If nothing survives
    """
    if not 0.0 < min_class_fraction <= 0.5:
        raise ValueError(f"min_class_fraction must be in (0, 0.5], got {min_class_fraction}")
    report = ExclusionReport()
    kept: List[TrialRecord] = []

    for subject_id, trials in group_by_subject(dataset).items():
        usable = []
        for trial in trials:
            if trial.faulty:
                report.removals.append(Exclusion(subject_id, trial.video_id, "faulty trial"))
            else:
                usable.append(trial)
        if not usable:
            report.removals.append(Exclusion(subject_id, None, "no usable trials"))
            continue

        broken = _first_channel_problem(usable, scenarios)
        if broken:
            report.removals.append(Exclusion(subject_id, None, broken))
            logger.info("Excluding subject %s: %s", subject_id, broken)
            continue

        imbalance = _imbalance_reason(usable, min_class_fraction, tie_high)
        if imbalance:
            report.removals.append(Exclusion(subject_id, None, imbalance))
            logger.info("Excluding subject %s: %s", subject_id, imbalance)
            continue

        kept.extend(usable)
        report.kept_subjects.append(subject_id)

    if not kept:
        raise EmptyDatasetError("no trials left after exclusions")
    return kept, report


def _first_channel_problem(trials: Sequence[TrialRecord], scenarios: Sequence[Scenario]) -> Optional[str]:
    for scenario in scenarios:
        for trial in trials:
            report = validate_trial(trial, scenario)
            if not report.ok:
                finding = report.findings[0]
                channel = finding.channel.value if finding.channel else "?"
                return f"{finding.kind} {channel} in video {trial.video_id}"
    return None


def _imbalance_reason(trials: Sequence[TrialRecord], min_class_fraction: float, tie_high: bool) -> Optional[str]:
    for dimension in Dimension:
        high, low = class_fractions(trials, dimension, tie_high)
        if min(high, low) < min_class_fraction:
            return (f"imbalanced {dimension.value} ratings "
                    f"(high {high:.1%}, low {low:.1%} < {min_class_fraction:.0%})")
    return None
