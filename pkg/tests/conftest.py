"""
Shared fixtures: hand-built signals and trials plus a small synthetic dataset.
"""

import numpy as np
import pytest

from app.core.models import Channel, SamRatings, TrialRecord, UniformSignal
from app.core.synthetic import SyntheticSpec, generate_synthetic_dataset


def sine(freq_hz: float, rate: float, duration: float, amplitude: float = 1.0, phase: float = 0.0) -> UniformSignal:
    t = np.arange(int(round(duration * rate))) / rate
    return UniformSignal(amplitude * np.sin(2 * np.pi * freq_hz * t + phase), rate)


def make_trial(subject: str = "S01", video: str = "v01", valence: float = 7.0, arousal: float = 3.0,
               channels=None, faulty: bool = False) -> TrialRecord:
    if channels is None:
        channels = {Channel.SKT: UniformSignal(np.full(40, 33.0), 4.0)}
    return TrialRecord(subject, video, channels, SamRatings(valence, arousal), faulty)


@pytest.fixture
def trial_factory():
    return make_trial


@pytest.fixture(scope="session")
def small_spec() -> SyntheticSpec:
    return SyntheticSpec(subjects=3, trials_per_subject=6, duration=30.0)


@pytest.fixture(scope="session")
def small_dataset(small_spec):
    return generate_synthetic_dataset(small_spec, seed=11)
