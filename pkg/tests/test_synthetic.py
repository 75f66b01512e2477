import numpy as np
import pytest

from app.core.errors import SyntheticSpecError
from app.core.models import BinaryLabel, Channel, DatasetFlavor, Dimension, IrregularSignal
from app.core.synthetic import LabelEffect, SyntheticSpec, generate_synthetic_dataset, truth_frame
from app.core.validator import binarize_rating


def test_same_seed_same_data(small_spec, small_dataset):
    again = generate_synthetic_dataset(small_spec, seed=11)
    first, second = small_dataset.trials[3], again.trials[3]
    np.testing.assert_array_equal(first.channels[Channel.ECG].samples, second.channels[Channel.ECG].samples)
    assert first.ratings == second.ratings


def test_different_seeds_differ(small_spec, small_dataset):
    other = generate_synthetic_dataset(small_spec, seed=12)
    assert not np.array_equal(small_dataset.trials[0].channels[Channel.RSP].samples,
                              other.trials[0].channels[Channel.RSP].samples)


def test_layout(small_spec, small_dataset):
    assert len(small_dataset) == small_spec.subjects * small_spec.trials_per_subject
    trial = small_dataset.trials[0]
    assert (trial.subject_id, trial.video_id) == ("S01", "v01")
    assert set(trial.channels) == {Channel.ECG, Channel.ACC_Z, Channel.BVP, Channel.RSP, Channel.EDA, Channel.SKT}
    assert isinstance(trial.channels[Channel.ACC_Z], IrregularSignal)
    assert np.all(np.diff(trial.channels[Channel.ACC_Z].timestamps) > 0)


def test_labels_are_balanced_and_match_ratings(small_spec, small_dataset):
    for subject in ("S01", "S02", "S03"):
        truth = [t for t in small_dataset.truth if t.subject_id == subject]
        assert sum(int(t.arousal) for t in truth) == small_spec.trials_per_subject // 2
    for trial, truth in zip(small_dataset.trials, small_dataset.truth):
        assert binarize_rating(trial.ratings.valence, Dimension.VALENCE) is truth.valence
        assert binarize_rating(trial.ratings.arousal, Dimension.AROUSAL) is truth.arousal


def test_arousal_raises_heart_rate(small_dataset):
    high = [t.heart_rate_bpm for t in small_dataset.truth if t.subject_id == "S01" and t.arousal is BinaryLabel.HIGH]
    low = [t.heart_rate_bpm for t in small_dataset.truth if t.subject_id == "S01" and t.arousal is BinaryLabel.LOW]
    assert np.mean(high) - np.mean(low) > 5.0


def test_faulty_trials_are_flagged():
    dataset = generate_synthetic_dataset(SyntheticSpec(subjects=2, trials_per_subject=4, duration=25.0,
                                                       faulty_trials=1), seed=1)
    assert sum(t.faulty for t in dataset.trials) == 2


def test_deap_flavor_channels():
    dataset = generate_synthetic_dataset(SyntheticSpec(subjects=1, trials_per_subject=2, duration=25.0,
                                                       flavor=DatasetFlavor.DEAP), seed=0)
    assert set(dataset.trials[0].channels) == {Channel.BVP, Channel.RSP, Channel.EDA, Channel.SKT,
                                               Channel.EMG, Channel.EOG}


@pytest.mark.parametrize("spec", [
    SyntheticSpec(subjects=0),
    SyntheticSpec(trials_per_subject=1),
    SyntheticSpec(duration=10.0),
    SyntheticSpec(high_fraction=1.0),
    SyntheticSpec(faulty_trials=38),
    SyntheticSpec(heart_rate_range=(100.0, 115.0)),
    SyntheticSpec(effects={Dimension.AROUSAL: LabelEffect(breaths_per_minute=12.0)}),
])
def test_infeasible_specs(spec):
    with pytest.raises(SyntheticSpecError):
        spec.validate()


def test_truth_frame(small_dataset):
    frame = truth_frame(small_dataset.truth)
    assert list(frame.columns) == ["subject_id", "video_id", "heart_rate_bpm", "breath_rate_hz",
                                   "responses_per_minute", "valence", "arousal"]
    assert len(frame) == len(small_dataset)
    assert set(frame["arousal"]) == {"High", "Low"}
