import math
import pickle

import numpy as np
import pytest

from app.core.errors import EmptyDatasetError, InvalidRatingError
from app.core.models import (
    BinaryLabel,
    Channel,
    DatasetFlavor,
    Dimension,
    Peripherals,
    IrregularSignal,
    SamRatings,
    Scenario,
    TrialRecord,
    UniformSignal,
    default_scenarios,
)
from app.core.validator import (
    MISSING_CHANNEL,
    NON_FINITE,
    NON_MONOTONE,
    apply_exclusions,
    binarize_rating,
    class_fractions,
    validate_trial,
)

from conftest import make_trial


class TestRatings:
    def test_out_of_range_rating_is_rejected(self):
        with pytest.raises(InvalidRatingError):
            SamRatings(valence=0.5, arousal=5.0)
        with pytest.raises(InvalidRatingError):
            SamRatings(valence=5.0, arousal=float("nan"))

    def test_optional_nan_becomes_none(self):
        ratings = SamRatings(6.0, 4.0, dominance=float("nan"), liking=2.0)
        assert ratings.dominance is None
        assert ratings.liking == 2.0

    @pytest.mark.parametrize("rating,tie_high,expected", [
        (5.0, False, BinaryLabel.LOW),
        (5.0, True, BinaryLabel.HIGH),
        (5.01, False, BinaryLabel.HIGH),
        (1.0, False, BinaryLabel.LOW),
        (9.0, False, BinaryLabel.HIGH),
    ])
    def test_binarize(self, rating, tie_high, expected):
        assert binarize_rating(rating, Dimension.VALENCE, tie_high) is expected

    def test_binarize_rejects_out_of_range(self):
        with pytest.raises(InvalidRatingError):
            binarize_rating(9.5, Dimension.AROUSAL)


class TestSignals:
    def test_samples_are_read_only_copies(self):
        source = np.arange(10.0)
        sig = UniformSignal(source, 2.0)
        source[0] = 99.0
        assert sig.samples[0] == 0.0
        with pytest.raises(ValueError):
            sig.samples[0] = 1.0
        assert sig.duration == 5.0

    def test_rate_must_be_positive(self):
        with pytest.raises(ValueError):
            UniformSignal(np.zeros(4), 0.0)


class TestTrialRecord:
    def test_derived_channels_cannot_be_ingested(self):
        with pytest.raises(ValueError, match="derived"):
            TrialRecord("S01", "v01", {Channel.SCG: UniformSignal(np.zeros(10), 200.0)}, SamRatings(5.0, 5.0))

    def test_survives_pickling(self):
        trial = make_trial(channels={Channel.EDA: UniformSignal(np.linspace(1, 2, 64), 32.0)}, faulty=True)
        clone = pickle.loads(pickle.dumps(trial))
        assert clone.key == trial.key
        assert clone.faulty
        np.testing.assert_array_equal(clone.channels[Channel.EDA].samples, trial.channels[Channel.EDA].samples)

    def test_flagged_keeps_channels(self):
        trial = make_trial()
        flagged = trial.flagged()
        assert flagged.faulty and not trial.faulty
        assert list(flagged.channels) == list(trial.channels)


class TestScenario:
    def test_parse_is_case_insensitive(self):
        scenario = Scenario.parse("scg+adr")
        assert scenario.label == "SCG+ADR"
        assert scenario.channels() == [Channel.SCG, Channel.ADR]
        assert scenario.required_channels() == [Channel.ACC_Z]

    def test_scg_all_brings_adr(self):
        scenario = Scenario(Channel.SCG, Peripherals.ALL)
        assert scenario.channels() == [Channel.SCG, Channel.RSP, Channel.ADR, Channel.EDA, Channel.SKT]
        assert scenario.required_channels() == [Channel.ACC_Z, Channel.RSP, Channel.EDA, Channel.SKT]

    def test_deap_all_brings_muscle_and_eye_channels(self):
        scenario = Scenario(Channel.BVP, Peripherals.ALL, DatasetFlavor.DEAP)
        assert Channel.EMG in scenario.channels() and Channel.EOG in scenario.channels()

    @pytest.mark.parametrize("text", ["ECG+ADR", "EDA+all", "SCG", "XYZ+RSP"])
    def test_invalid_labels(self, text):
        with pytest.raises(ValueError):
            Scenario.parse(text)

    def test_deap_only_offers_bvp(self):
        with pytest.raises(ValueError):
            Scenario(Channel.ECG, Peripherals.ALL, DatasetFlavor.DEAP)

    def test_default_scenarios(self):
        labels = [s.label for s in default_scenarios(DatasetFlavor.EMOWEAR)]
        assert labels == ["ECG+all", "BVP+all", "SCG+all", "ECG+RSP", "BVP+RSP", "SCG+RSP", "SCG+ADR"]
        assert [s.label for s in default_scenarios(DatasetFlavor.DEAP)] == ["BVP+all"]


class TestValidation:
    def test_missing_channel_and_non_finite_samples(self):
        samples = np.ones(100)
        samples[17] = np.nan
        trial = make_trial(channels={Channel.RSP: UniformSignal(samples, 25.0)})
        report = validate_trial(trial, Scenario.parse("ECG+RSP"))
        kinds = [f.kind for f in report.findings]
        assert kinds == [MISSING_CHANNEL, NON_FINITE]
        assert report.findings[0].channel is Channel.ECG
        assert report.findings[1].index == 17

    def test_clean_trial_without_scenario(self):
        assert validate_trial(make_trial()).ok

    def test_non_monotone_accelerometer_clock(self):
        acc = IrregularSignal([0.0, 0.01, 0.02, 0.02, 0.015, 0.03], np.ones(6))
        report = validate_trial(make_trial(channels={Channel.ACC_Z: acc}))
        assert [f.kind for f in report.findings] == [NON_MONOTONE]
        assert report.findings[0].channel is Channel.ACC_Z
        assert report.findings[0].index == 3


class TestExclusions:
    def _subject(self, subject, valences, faulty=()):
        return [make_trial(subject, f"v{i + 1}", valence=v, arousal=3.0 if i % 2 else 7.0, faulty=i in faulty)
                for i, v in enumerate(valences)]

    def test_faulty_and_imbalanced(self):
        balanced = self._subject("S01", [7, 3, 7, 3], faulty=(0,))
        one_sided = self._subject("S02", [7, 7, 7, 7])
        kept, report = apply_exclusions(balanced + one_sided, min_class_fraction=0.1)
        assert [t.key for t in kept] == [("S01", "v2"), ("S01", "v3"), ("S01", "v4")]
        assert report.excluded_subjects == ["S02"]
        assert report.excluded_trials == [("S01", "v1")]
        assert report.kept_subjects == ["S01"]

    def test_missing_channel_excludes_the_subject(self):
        trials = self._subject("S01", [7, 3, 7, 3])
        with pytest.raises(EmptyDatasetError):
            apply_exclusions(trials, scenarios=[Scenario.parse("ECG+RSP")])

    def test_class_fractions(self):
        trials = self._subject("S01", [7, 3, 5, 9])
        high, low = class_fractions(trials, Dimension.VALENCE)
        assert math.isclose(high, 0.5) and math.isclose(low, 0.5)

    def test_exclusions_are_idempotent(self):
        trials = (self._subject("S01", [7, 3, 7, 3], faulty=(0,)) + self._subject("S02", [7, 7, 7, 7])
                  + self._subject("S03", [3, 7, 3, 7, 5], faulty=(4,)))
        kept, _ = apply_exclusions(trials, min_class_fraction=0.25)
        again, report = apply_exclusions(kept, min_class_fraction=0.25)
        assert [t.key for t in again] == [t.key for t in kept]
        assert report.excluded_subjects == [] and report.excluded_trials == []

    def test_exclusions_are_idempotent_on_synthetic_trials(self, small_dataset):
        scenarios = [Scenario.parse("ECG+RSP"), Scenario.parse("SCG+ADR")]
        kept, _ = apply_exclusions(small_dataset.trials, scenarios=scenarios)
        again, report = apply_exclusions(kept, scenarios=scenarios)
        assert [t.key for t in again] == [t.key for t in kept]
        assert not report.removals

    def test_fraction_must_be_in_range(self):
        with pytest.raises(ValueError):
            apply_exclusions(self._subject("S01", [7, 3]), min_class_fraction=0.6)
