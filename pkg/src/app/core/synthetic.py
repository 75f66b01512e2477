"""
Synthetic physiological trials with known generating parameters.

Each subject gets a baseline heart rate and breathing rate; every trial draws
binary valence and arousal labels, shifts the physiology by the configured
per-class effects and renders the waveforms the pipeline ingests. The
generating parameters are returned alongside the trials as ground truth.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.constants import (
    ADR_BAND,
    ADR_MIN_DURATION,
    AO_ENVELOPE_BAND,
    MIN_EDA_DURATION,
    SYNTH_ACC_RATE,
    SYNTH_BVP_RATE,
    SYNTH_DEAP_RATE,
    SYNTH_ECG_RATE,
    SYNTH_EDA_RATE,
    SYNTH_RSP_RATE,
    SYNTH_SKT_RATE,
)
from app.core.errors import SyntheticSpecError
from app.core.models import (
    BinaryLabel,
    Channel,
    DatasetFlavor,
    Dimension,
    IrregularSignal,
    SamRatings,
    TrialRecord,
    UniformSignal,
)
from app.core.utils import derive_rng

# Initialize module logger
logger = logging.getLogger(__name__)

HEART_RATE_LIMITS = (60.0 * AO_ENVELOPE_BAND[0], 60.0 * AO_ENVELOPE_BAND[1])  # bpm
BREATH_RATE_LIMITS = ADR_BAND  # Hz
HIGH_RATING_RANGE = (5.5, 9.0)
LOW_RATING_RANGE = (1.0, 4.5)


@dataclass(frozen=True)
class LabelEffect:
    """Shift applied to a High-labelled trial (Low trials are unshifted)."""

    heart_rate_bpm: float = 0.0
    breaths_per_minute: float = 0.0
    responses_per_minute: float = 0.0
    skin_temperature_c: float = 0.0


@dataclass(frozen=True)
class SyntheticSpec:
    subjects: int = 4
    trials_per_subject: int = 38
    duration: float = 60.0
    heart_rate_range: Tuple[float, float] = (60.0, 85.0)
    breath_rate_range: Tuple[float, float] = (0.2, 0.27)
    heart_rate_sd: float = 1.5
    high_fraction: float = 0.5
    effects: Mapping[Dimension, LabelEffect] = field(default_factory=lambda: {
        Dimension.AROUSAL: LabelEffect(heart_rate_bpm=10.0, breaths_per_minute=3.0, responses_per_minute=2.0),
        Dimension.VALENCE: LabelEffect(),
    })
    flavor: DatasetFlavor = DatasetFlavor.SYNTHETIC
    noise: float = 0.02
    faulty_trials: int = 0

    def effect(self, dimension: Dimension) -> LabelEffect:
        return self.effects.get(dimension, LabelEffect())

    def validate(self) -> None:
        """
        Check the spec is feasible for the detectors.

        Raises:
            SyntheticSpecError: If any parameter is out of range
        """
        if self.subjects < 1:
            raise SyntheticSpecError("at least one subject is required")
        if self.trials_per_subject < 2:
            raise SyntheticSpecError("at least two trials per subject are required")
        if self.duration < max(ADR_MIN_DURATION, MIN_EDA_DURATION):
            raise SyntheticSpecError(f"trials must last at least {max(ADR_MIN_DURATION, MIN_EDA_DURATION):g} s")
        if not 0.0 < self.high_fraction < 1.0:
            raise SyntheticSpecError("high_fraction must be inside (0, 1)")
        if self.noise < 0 or self.heart_rate_sd < 0:
            raise SyntheticSpecError("noise levels must be non-negative")
        if not 0 <= self.faulty_trials < self.trials_per_subject:
            raise SyntheticSpecError("faulty_trials must leave usable trials")
        shifts = [self.effect(d) for d in Dimension]
        _check_range("heart rate", self.heart_rate_range,
                      sum(min(0.0, e.heart_rate_bpm) for e in shifts),
                      sum(max(0.0, e.heart_rate_bpm) for e in shifts), HEART_RATE_LIMITS, "bpm")
        _check_range("breath rate", self.breath_rate_range,
                      sum(min(0.0, e.breaths_per_minute) for e in shifts) / 60.0,
                      sum(max(0.0, e.breaths_per_minute) for e in shifts) / 60.0, BREATH_RATE_LIMITS, "Hz")
        if any(e.responses_per_minute < -2.0 for e in shifts):
            raise SyntheticSpecError("skin-response effect would make the response rate negative")


def _check_range(name: str, base: Tuple[float, float], down: float, up: float,
                 limits: Tuple[float, float], unit: str) -> None:
    low, high = base
    if not low <= high:
        raise SyntheticSpecError(f"{name} range {base} is reversed")
    if low + down < limits[0] or high + up > limits[1]:
        raise SyntheticSpecError(
            f"{name} {low + down:g}-{high + up:g} {unit} leaves the detectable range "
            f"{limits[0]:g}-{limits[1]:g} {unit}"
        )


@dataclass(frozen=True)
class TrialTruth:
    subject_id: str
    video_id: str
    heart_rate_bpm: float
    breath_rate_hz: float
    responses_per_minute: float
    valence: BinaryLabel
    arousal: BinaryLabel


@dataclass(frozen=True)
class SyntheticDataset:
    trials: List[TrialRecord]
    truth: List[TrialTruth]

    def __iter__(self):
        return iter(self.trials)

    def __len__(self) -> int:
        return len(self.trials)


def truth_frame(truth: Sequence[TrialTruth]) -> pd.DataFrame:
    """Ground truth as a table (one row per trial)."""
    return pd.DataFrame([{
        "subject_id": t.subject_id,
        "video_id": t.video_id,
        "heart_rate_bpm": t.heart_rate_bpm,
        "breath_rate_hz": t.breath_rate_hz,
        "responses_per_minute": t.responses_per_minute,
        "valence": str(t.valence),
        "arousal": str(t.arousal),
    } for t in truth], columns=["subject_id", "video_id", "heart_rate_bpm", "breath_rate_hz",
                                "responses_per_minute", "valence", "arousal"])


# Waveform building blocks

def breathing_phase(breath_hz: float, offset: float) -> Callable[[np.ndarray], np.ndarray]:
    """Phase of a breathing rhythm whose rate wanders +-5 % around `breath_hz`."""
    wander, depth = 0.02, 0.05

    def phase(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        drift = depth / (2 * np.pi * wander) * (np.cos(offset) - np.cos(2 * np.pi * wander * t + offset))
        return 2 * np.pi * breath_hz * (t + drift)

    return phase


def beat_times(heart_rate_bpm: float, duration: float, phase: Callable, rng: np.random.Generator,
               sinus_arrhythmia: float = 0.03, jitter: float = 0.008) -> np.ndarray:
    """Heart-beat times with respiratory sinus arrhythmia and small random variability."""
    period = 60.0 / heart_rate_bpm
    times = []
    t = float(rng.uniform(0.1, period))
    while t < duration - 0.5:
        times.append(t)
        step = period * (1.0 + sinus_arrhythmia * math.sin(float(phase(t)))) + rng.normal(0.0, jitter)
        t += max(step, 0.3)
    return np.asarray(times)


def _stamp(times: np.ndarray, events: np.ndarray, shape: Callable[[np.ndarray], np.ndarray],
           reach: Tuple[float, float]) -> np.ndarray:
    """Sum of `shape(t - event)` over events, evaluated on the `reach` window only."""
    out = np.zeros_like(times)
    for event in events:
        lo, hi = np.searchsorted(times, [event + reach[0], event + reach[1]])
        out[lo:hi] += shape(times[lo:hi] - event)
    return out


def _gaussian(t: np.ndarray, center: float, width: float) -> np.ndarray:
    return np.exp(-0.5 * ((t - center) / width) ** 2)


def ecg_shape(t: np.ndarray) -> np.ndarray:
    return (0.12 * _gaussian(t, -0.18, 0.025) - 0.1 * _gaussian(t, -0.03, 0.01)
            + 1.0 * _gaussian(t, 0.0, 0.01) - 0.25 * _gaussian(t, 0.03, 0.01)
            + 0.3 * _gaussian(t, 0.26, 0.04))


def scg_shape(t: np.ndarray) -> np.ndarray:
    """Aortic opening vibration 50 ms after the R wave with a weaker closure complex."""
    opening = _gaussian(t, 0.05, 0.015) * np.sin(2 * np.pi * 15.0 * (t - 0.05))
    closure = 0.2 * _gaussian(t, 0.35, 0.015) * np.sin(2 * np.pi * 15.0 * (t - 0.35))
    return opening + closure


def pulse_shape(t: np.ndarray) -> np.ndarray:
    """Systolic wave 250 ms after the R wave plus a dicrotic wave."""
    return _gaussian(t, 0.25, 0.08) + 0.3 * _gaussian(t, 0.55, 0.1)


def skin_response_shape(t: np.ndarray) -> np.ndarray:
    rise, decay = 0.75, 4.0
    shape = np.exp(-np.clip(t, 0, None) / decay) - np.exp(-np.clip(t, 0, None) / rise)
    return np.where(t >= 0, shape / 0.553, 0.0)


def blink_shape(t: np.ndarray) -> np.ndarray:
    return _gaussian(t, 0.0, 0.06)


def _grid(rate: float, duration: float) -> np.ndarray:
    return np.arange(int(round(rate * duration))) / rate


def _noise(rng: np.random.Generator, level: float, n: int) -> np.ndarray:
    return rng.normal(0.0, level, n) if level > 0 else np.zeros(n)


# Trial rendering

@dataclass(frozen=True)
class _TrialParams:
    heart_rate_bpm: float
    breath_rate_hz: float
    responses_per_minute: float
    skin_temperature_c: float
    eda_level: float


def _render_emowear(params: _TrialParams, spec: SyntheticSpec, rng: np.random.Generator
                    ) -> Dict[Channel, object]:
    duration, noise = spec.duration, spec.noise
    phase = breathing_phase(params.breath_rate_hz, float(rng.uniform(0, 2 * np.pi)))
    beats = beat_times(params.heart_rate_bpm, duration, phase, rng)
    channels: Dict[Channel, object] = {}

    t = _grid(SYNTH_ECG_RATE, duration)
    channels[Channel.ECG] = UniformSignal(_stamp(t, beats, ecg_shape, (-0.3, 0.45))
                                          + _noise(rng, noise * 0.5, t.size), SYNTH_ECG_RATE)

    # irregular accelerometer clock: nominal period with +-25 % jitter, always increasing
    n_acc = int(round(SYNTH_ACC_RATE * duration))
    t = (np.arange(n_acc) + rng.uniform(-0.25, 0.25, n_acc)) / SYNTH_ACC_RATE
    t[0] = max(t[0], 0.0)
    acc = (0.98 + 0.004 * np.sin(phase(t)) + 0.01 * _stamp(t, beats, scg_shape, (0.0, 0.45))
           + _noise(rng, noise * 0.025, n_acc))
    channels[Channel.ACC_Z] = IrregularSignal(t, acc)

    t = _grid(SYNTH_BVP_RATE, duration)
    channels[Channel.BVP] = UniformSignal(_stamp(t, beats, pulse_shape, (0.0, 1.0)) + 0.1 * np.sin(phase(t))
                                          + _noise(rng, noise, t.size), SYNTH_BVP_RATE)

    t = _grid(SYNTH_RSP_RATE, duration)
    channels[Channel.RSP] = UniformSignal(_breathing(t, phase) + _noise(rng, noise, t.size), SYNTH_RSP_RATE)

    channels[Channel.EDA] = _render_eda(params, duration, SYNTH_EDA_RATE, noise, rng)

    t = _grid(SYNTH_SKT_RATE, duration)
    channels[Channel.SKT] = UniformSignal(params.skin_temperature_c + 0.002 * t
                                          + _noise(rng, noise * 0.05, t.size), SYNTH_SKT_RATE)
    return channels


def _render_deap(params: _TrialParams, spec: SyntheticSpec, rng: np.random.Generator
                 ) -> Dict[Channel, object]:
    duration, noise, rate = spec.duration, spec.noise, SYNTH_DEAP_RATE
    phase = breathing_phase(params.breath_rate_hz, float(rng.uniform(0, 2 * np.pi)))
    beats = beat_times(params.heart_rate_bpm, duration, phase, rng)
    t = _grid(rate, duration)
    channels: Dict[Channel, object] = {
        Channel.BVP: UniformSignal(_stamp(t, beats, pulse_shape, (0.0, 1.0)) + 0.1 * np.sin(phase(t))
                                   + _noise(rng, noise, t.size), rate),
        Channel.RSP: UniformSignal(_breathing(t, phase) + _noise(rng, noise, t.size), rate),
        Channel.EDA: _render_eda(params, duration, rate, noise, rng),
        Channel.SKT: UniformSignal(params.skin_temperature_c + 0.002 * t + _noise(rng, noise * 0.05, t.size), rate),
    }
    channels[Channel.EMG] = UniformSignal(rng.normal(0.0, 20.0 * (1.0 + noise), t.size), rate)
    blinks = np.sort(rng.uniform(0.5, duration - 0.5, rng.poisson(15.0 * duration / 60.0)))
    channels[Channel.EOG] = UniformSignal(200.0 * _stamp(t, blinks, blink_shape, (-0.3, 0.3))
                                          + rng.normal(0.0, 10.0, t.size), rate)
    return channels


def _breathing(t: np.ndarray, phase: Callable) -> np.ndarray:
    amplitude = 1.0 + 0.1 * np.sin(2 * np.pi * 0.03 * t)
    return amplitude * np.sin(phase(t))


def _render_eda(params: _TrialParams, duration: float, rate: float, noise: float,
                rng: np.random.Generator) -> UniformSignal:
    t = _grid(rate, duration)
    count = rng.poisson(max(params.responses_per_minute, 0.0) * duration / 60.0)
    onsets = np.sort(rng.uniform(0.0, duration - 2.0, count))
    responses = np.zeros_like(t)
    for onset, amplitude in zip(onsets, rng.uniform(0.1, 0.5, count)):
        lo = np.searchsorted(t, onset)
        responses[lo:] += amplitude * skin_response_shape(t[lo:] - onset)
    level = params.eda_level + 0.005 * t + responses + _noise(rng, noise * 0.01, t.size)
    return UniformSignal(level, rate)


def _balanced_labels(n: int, high_fraction: float, rng: np.random.Generator) -> np.ndarray:
    high = min(max(int(round(high_fraction * n)), 1), n - 1)
    labels = np.array([1] * high + [0] * (n - high))
    return rng.permutation(labels)


def _rating(label: int, rng: np.random.Generator) -> float:
    low, high = HIGH_RATING_RANGE if label else LOW_RATING_RANGE
    return round(float(rng.uniform(low, high)), 2)


def generate_synthetic_dataset(spec: SyntheticSpec = SyntheticSpec(), seed: int = 0) -> SyntheticDataset:
    """
    Generate a labelled synthetic dataset.

    Args:
        spec: Subjects, trials, rate ranges and per-class effects
        seed: Random seed; the same seed gives bit-identical data

    Returns:
        Trials (EmoWear-like channels, or DEAP-like for the DEAP flavor) and
        their ground truth

    Raises:
        SyntheticSpecError: If the spec is infeasible
    """
    spec.validate()
    render = _render_deap if DatasetFlavor(spec.flavor) is DatasetFlavor.DEAP else _render_emowear
    trials: List[TrialRecord] = []
    truth: List[TrialTruth] = []

    for s in range(spec.subjects):
        subject = f"S{s + 1:02d}"
        subject_rng = derive_rng(seed, "synthetic", subject)
        base_hr = float(subject_rng.uniform(*spec.heart_rate_range))
        base_br = float(subject_rng.uniform(*spec.breath_rate_range))
        base_temp = float(subject_rng.uniform(32.0, 34.5))
        eda_level = float(subject_rng.uniform(2.0, 8.0))
        labels = {d: _balanced_labels(spec.trials_per_subject, spec.high_fraction, subject_rng) for d in Dimension}
        faulty = set(subject_rng.choice(spec.trials_per_subject, spec.faulty_trials, replace=False).tolist())

        for k in range(spec.trials_per_subject):
            video = f"v{k + 1:02d}"
            rng = derive_rng(seed, "synthetic", subject, video)
            shift = [spec.effect(d) for d in Dimension if labels[d][k]]
            params = _TrialParams(
                heart_rate_bpm=float(np.clip(base_hr + sum(e.heart_rate_bpm for e in shift)
                                             + rng.normal(0.0, spec.heart_rate_sd), *HEART_RATE_LIMITS)),
                breath_rate_hz=float(np.clip(base_br + sum(e.breaths_per_minute for e in shift) / 60.0,
                                             *BREATH_RATE_LIMITS)),
                responses_per_minute=2.0 + sum(e.responses_per_minute for e in shift),
                skin_temperature_c=base_temp + sum(e.skin_temperature_c for e in shift),
                eda_level=eda_level,
            )
            ratings = SamRatings(
                valence=_rating(labels[Dimension.VALENCE][k], rng),
                arousal=_rating(labels[Dimension.AROUSAL][k], rng),
                dominance=round(float(rng.uniform(1.0, 9.0)), 2),
                liking=round(float(rng.uniform(1.0, 9.0)), 2),
            )
            trial = TrialRecord(subject, video, render(params, spec, rng), ratings, faulty=k in faulty)
            trials.append(trial)
            truth.append(TrialTruth(subject, video, params.heart_rate_bpm, params.breath_rate_hz,
                                    params.responses_per_minute,
                                    BinaryLabel(int(labels[Dimension.VALENCE][k])),
                                    BinaryLabel(int(labels[Dimension.AROUSAL][k]))))
        logger.debug("Generated subject %s (%.1f bpm, %.3f Hz)", subject, base_hr, base_br)

    logger.info("Generated %d synthetic trials for %d subjects", len(trials), spec.subjects)
    return SyntheticDataset(trials, truth)
