"""
Event detection for cardiac and respiratory signals.

Turns preprocessed channels into beat series (ECG R-peaks, SCG AO-peaks,
BVP pulse peaks, breath peaks), derives SCG and ADR from the dorsoventral
chest acceleration, and builds screened inter-beat interval series.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy import signal as sp_signal

from app.core.constants import (
    ADR_BAND,
    ADR_BASELINE_SECONDS,
    ADR_MIN_DURATION,
    AO_ENVELOPE_BAND,
    AO_HEIGHT_PERCENTILE,
    AO_MIN_DISTANCE,
    AO_RELATIVE_HEIGHT,
    BREATH_MIN_DISTANCE,
    BREATH_MIN_LOBE_FRACTION,
    BVP_MIN_DISTANCE,
    BVP_NEGLIGIBLE_FRACTION,
    BVP_PROMINENCE_FACTOR,
    BVP_PROMINENCE_PERCENTILE,
    BVP_ROLLING_SECONDS,
    DETREND_WINDOW,
    ECG_BAND,
    ECG_BEAT_WINDOW,
    ECG_MIN_BLOCK,
    ECG_OFFSET_BETA,
    ECG_QRS_WINDOW,
    ECG_REFRACTORY,
    IBI_SCREENING,
    IBI_WINDOW,
    MIN_DETECTOR_DURATION,
    SCG_BAND,
    SCG_RATE,
)
from app.core.dsp import (
    BandSpec,
    bandpass,
    centered_moving_average,
    hilbert_envelope,
    moving_average_detrend,
    resample_uniform,
)
from app.core.errors import EmptyBeatsError, InsufficientBeatsError, InsufficientDataError
from app.core.models import IrregularSignal, UniformSignal

# Initialize module logger
logger = logging.getLogger(__name__)

# Processed output smaller than this fraction of the raw scale counts as flat
FLAT_TOLERANCE = 1e-9


class BeatKind(str, Enum):
    R_PEAK = "RPeak"
    AO_PEAK = "AoPeak"
    PULSE_PEAK = "PulsePeak"
    BREATH_PEAK = "BreathPeak"


@dataclass(frozen=True, eq=False)
class BeatSeries:
    """Detected event times (seconds, strictly increasing) of one trial."""

    event_times: np.ndarray
    kind: BeatKind
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        times = np.array(self.event_times, dtype=float, copy=True)
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("event times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "event_times", times)
        object.__setattr__(self, "kind", BeatKind(self.kind))

    def __len__(self) -> int:
        return len(self.event_times)


@dataclass(frozen=True, eq=False)
class IbiSeries:
    """
    Screened interval series.

    `intervals[i]` starts at `onset_times[i]`. Rejected gaps are kept so the
    retained and rejected durations always add up to the covered span.
    """

    intervals: np.ndarray
    onset_times: np.ndarray
    rejected_count: int = 0
    rejected_intervals: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        for name in ("intervals", "onset_times", "rejected_intervals"):
            array = np.array(getattr(self, name), dtype=float, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if len(self.intervals) != len(self.onset_times):
            raise ValueError("intervals and onset_times differ in length")
        if np.any(self.intervals <= 0):
            raise ValueError("intervals must be positive")

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def span(self) -> float:
        return float(self.intervals.sum() + self.rejected_intervals.sum())


def _as_irregular(sig: Union[IrregularSignal, UniformSignal]) -> IrregularSignal:
    return sig.to_irregular() if isinstance(sig, UniformSignal) else sig


def _require_duration(sig: UniformSignal, minimum: float, what: str) -> None:
    if sig.duration < minimum:
        raise InsufficientDataError(f"{what} needs at least {minimum:g} s, got {sig.duration:.2f} s")


def _is_flat(processed: np.ndarray, raw: np.ndarray) -> bool:
    scale = float(np.max(np.abs(raw))) if raw.size else 0.0
    level = float(np.max(np.abs(processed))) if processed.size else 0.0
    return scale == 0.0 or level <= FLAT_TOLERANCE * scale


def _to_series(sig: UniformSignal, indices: np.ndarray, kind: BeatKind, **diagnostics) -> BeatSeries:
    if len(indices) == 0:
        raise EmptyBeatsError(f"no {kind.value} events found", dict(diagnostics, samples=len(sig)))
    times = sig.start_time + np.asarray(indices, dtype=float) / sig.rate
    logger.debug("Detected %d %s events over %.1f s", len(times), kind.value, sig.duration)
    return BeatSeries(times, kind, dict(diagnostics))


def derive_scg(acc_z: Union[IrregularSignal, UniformSignal], rate: float = SCG_RATE) -> UniformSignal:
    """Resample the dorsoventral acceleration onto the regular SCG grid."""
    return resample_uniform(_as_irregular(acc_z), rate)


def detect_ao_peaks(scg: UniformSignal,
                    band: Tuple[float, float] = SCG_BAND,
                    envelope_band: Tuple[float, float] = AO_ENVELOPE_BAND,
                    min_distance: float = AO_MIN_DISTANCE,
                    relative_height: float = AO_RELATIVE_HEIGHT) -> BeatSeries:
    """
    Locate aortic-valve-opening peaks in a seismocardiogram.

    Band-pass 10-20 Hz, Hilbert envelope, band-pass 0.5-2 Hz, then local
    maxima with a refractory distance and a height floor relative to the
    envelope's upper percentile.

    Args:
        scg: SCG series (nominally 200 Hz)
        band: Cardiac vibration band
        envelope_band: Band applied to the envelope
        min_distance: Refractory distance between peaks in seconds
        relative_height: Height floor as a fraction of the envelope's 98th percentile

    Returns:
        AO-peak series

    Raises:
        InsufficientDataError: If the signal is shorter than 5 s
        EmptyBeatsError: If no peak survives
    """
    _require_duration(scg, MIN_DETECTOR_DURATION, "AO detection")
    vibration = bandpass(scg, BandSpec.of(band))
    envelope = bandpass(hilbert_envelope(vibration), BandSpec.of(envelope_band))
    smooth = np.asarray(envelope.samples)
    if _is_flat(smooth, np.asarray(scg.samples) - np.mean(scg.samples)):
        raise EmptyBeatsError("SCG envelope is flat", {"samples": len(scg)})

    height = relative_height * float(np.percentile(smooth, AO_HEIGHT_PERCENTILE))
    distance = max(1, int(np.ceil(min_distance * scg.rate)))
    peaks, _ = sp_signal.find_peaks(smooth, height=max(height, 0.0), distance=distance)
    return _to_series(scg, peaks, BeatKind.AO_PEAK, height=height)


def _runs(mask: np.ndarray) -> np.ndarray:
    """(start, stop) index pairs of the True runs of a boolean mask."""
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return edges.reshape(-1, 2)


def detect_r_peaks(ecg: UniformSignal,
                   band: Tuple[float, float] = ECG_BAND,
                   qrs_window: float = ECG_QRS_WINDOW,
                   beat_window: float = ECG_BEAT_WINDOW,
                   offset: float = ECG_OFFSET_BETA,
                   refractory: float = ECG_REFRACTORY) -> BeatSeries:
    """
    Two-moving-averages R-peak detector.

    The squared 8-20 Hz signal is averaged over a QRS-length and a beat-length
    window; blocks where the short average exceeds the long one (plus an offset
    proportional to the mean energy) mark QRS complexes, and the peak of the
    filtered signal inside each block is the R-peak.
    """
    _require_duration(ecg, MIN_DETECTOR_DURATION, "R-peak detection")
    filtered = np.asarray(bandpass(ecg, BandSpec.of(band)).samples)
    if _is_flat(filtered, np.asarray(ecg.samples) - np.mean(ecg.samples)):
        raise EmptyBeatsError("ECG is flat after filtering", {"samples": len(ecg)})

    squared = filtered ** 2
    ma_qrs = centered_moving_average(squared, max(1, int(round(qrs_window * ecg.rate))))
    ma_beat = centered_moving_average(squared, max(1, int(round(beat_window * ecg.rate))))
    threshold = ma_beat + offset * float(np.mean(squared))
    min_block = max(1, int(round(ECG_MIN_BLOCK * ecg.rate)))

    peaks = []
    for start, stop in _runs(ma_qrs > threshold):
        if stop - start < min_block:
            continue
        peaks.append(start + int(np.argmax(filtered[start:stop])))

    gap = int(round(refractory * ecg.rate))
    kept = []
    for index in peaks:
        if kept and index - kept[-1] < gap:
            if filtered[index] > filtered[kept[-1]]:
                kept[-1] = index
            continue
        kept.append(index)
    return _to_series(ecg, np.asarray(kept, dtype=int), BeatKind.R_PEAK, blocks=len(peaks))


def _rolling_percentile(times: np.ndarray, values: np.ndarray, half_width: float, q: float) -> np.ndarray:
    out = np.empty_like(values)
    lo = np.searchsorted(times, times - half_width, side="left")
    hi = np.searchsorted(times, times + half_width, side="right")
    for i, (a, b) in enumerate(zip(lo, hi)):
        out[i] = np.percentile(values[a:b], q)
    return out


def detect_bvp_peaks(bvp: UniformSignal,
                     detrend_window: int = DETREND_WINDOW,
                     min_distance: float = BVP_MIN_DISTANCE) -> BeatSeries:
    """
    Pulse peaks of a blood volume pulse signal.

    After moving-average detrending, candidate maxima whose prominence is
    negligible next to the signal's 2-98 percentile range are dropped; the
    rest are kept when their prominence reaches half the rolling 60th
    percentile of neighbouring candidates' prominences (10 s window).
    """
    _require_duration(bvp, MIN_DETECTOR_DURATION, "pulse detection")
    detrended = np.asarray(moving_average_detrend(bvp, detrend_window).samples)
    if _is_flat(detrended, np.asarray(bvp.samples) - np.mean(bvp.samples)):
        raise EmptyBeatsError("BVP is flat after detrending", {"samples": len(bvp)})

    distance = max(1, int(np.ceil(min_distance * bvp.rate)))
    spread = float(np.percentile(detrended, 98) - np.percentile(detrended, 2))
    floor = BVP_NEGLIGIBLE_FRACTION * spread
    candidates, props = sp_signal.find_peaks(detrended, distance=distance, prominence=floor)
    if len(candidates) == 0:
        return _to_series(bvp, candidates, BeatKind.PULSE_PEAK, floor=floor)
    prominences = props["prominences"]
    reference = _rolling_percentile(candidates / bvp.rate, prominences,
                                    BVP_ROLLING_SECONDS / 2.0, BVP_PROMINENCE_PERCENTILE)
    keep = prominences >= BVP_PROMINENCE_FACTOR * reference
    return _to_series(bvp, candidates[keep], BeatKind.PULSE_PEAK, candidates=len(candidates), floor=floor)


def derive_adr(acc_z: Union[IrregularSignal, UniformSignal],
               rate: float = SCG_RATE,
               band: Tuple[float, float] = ADR_BAND,
               baseline_seconds: float = ADR_BASELINE_SECONDS) -> UniformSignal:
    """
    Accelerometry-derived respiration.

    Resamples to 200 Hz, keeps the 0.15-0.35 Hz respiratory band and removes
    the remaining baseline with a 20 s moving average.

    Raises:
        InsufficientDataError: If the recording is shorter than 20 s
    """
    irregular = _as_irregular(acc_z)
    if irregular.duration < ADR_MIN_DURATION:
        raise InsufficientDataError(
            f"ADR needs at least {ADR_MIN_DURATION:g} s, got {irregular.duration:.2f} s"
        )
    uniform = resample_uniform(irregular, rate)
    breathing = bandpass(uniform, BandSpec.of(band))
    window = max(1, int(round(baseline_seconds * rate)))
    return moving_average_detrend(breathing, window)


def detect_breath_cycles(resp: UniformSignal,
                         min_distance: float = BREATH_MIN_DISTANCE,
                         min_lobe_fraction: float = BREATH_MIN_LOBE_FRACTION) -> BeatSeries:
    """
    Inhalation peaks of a band-limited respiratory waveform.

    Each peak is the maximum between an upward zero crossing and the next
    downward one. Lobes below a fraction of the median lobe height are noise;
    peaks closer than the minimum cycle distance keep the larger one.
    """
    x = np.asarray(resp.samples, dtype=float)
    x = x - np.mean(x) if x.size else x
    if x.size < 3 or _is_flat(x, np.asarray(resp.samples)):
        raise EmptyBeatsError("respiratory waveform is flat", {"samples": len(resp)})

    positive = x > 0
    ups = np.flatnonzero(~positive[:-1] & positive[1:]) + 1
    downs = np.flatnonzero(positive[:-1] & ~positive[1:]) + 1
    peaks, heights = [], []
    for up in ups:
        following = downs[downs > up]
        if following.size == 0:
            break
        lobe = x[up:following[0]]
        peaks.append(up + int(np.argmax(lobe)))
        heights.append(float(lobe.max()))
    if not peaks:
        return _to_series(resp, np.empty(0, dtype=int), BeatKind.BREATH_PEAK)

    heights = np.asarray(heights)
    floor = min_lobe_fraction * float(np.median(heights))
    gap = min_distance * resp.rate
    kept, kept_heights = [], []
    for index, height in zip(peaks, heights):
        if height < floor:
            continue
        if kept and index - kept[-1] < gap:
            if height > kept_heights[-1]:
                kept[-1], kept_heights[-1] = index, height
            continue
        kept.append(index)
        kept_heights.append(height)
    return _to_series(resp, np.asarray(kept, dtype=int), BeatKind.BREATH_PEAK, lobes=len(peaks))


def build_ibi(beats: BeatSeries,
              window: Optional[Tuple[float, float]] = IBI_WINDOW,
              screening: bool = IBI_SCREENING) -> IbiSeries:
    """
    Successive event differences with plausibility screening.

    Args:
        beats: Detected events
        window: Inclusive plausible interval range in seconds
        screening: When False every interval is kept

    Returns:
        Interval series with the rejected gaps counted

    Raises:
        InsufficientBeatsError: If fewer than two intervals survive
    """
    times = np.asarray(beats.event_times)
    if len(times) < 3:
        raise InsufficientBeatsError(f"{len(times)} {beats.kind.value} events, need at least 3")
    intervals = np.diff(times)
    onsets = times[:-1]
    if screening and window is not None:
        keep = (intervals >= window[0]) & (intervals <= window[1])
    else:
        keep = np.ones(len(intervals), dtype=bool)
    rejected = intervals[~keep]
    if rejected.size:
        logger.debug("Rejected %d implausible %s intervals", rejected.size, beats.kind.value)
    if int(keep.sum()) < 2:
        raise InsufficientBeatsError(
            f"only {int(keep.sum())} plausible intervals out of {len(intervals)}"
        )
    return IbiSeries(intervals[keep], onsets[keep], int(rejected.size), rejected)
