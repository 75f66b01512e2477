"""
Per-trial feature extraction.

Cardiac channels (ECG, BVP, SCG) are summarized through their IBI series,
respiratory channels (RSP, ADR) through the waveform and its breath cycles,
and EDA, SKT, EMG and EOG through waveform statistics and band powers.
Feature names are namespaced ``channel.feature`` and their order depends only
on the scenario and the extended flag.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy import signal as sp_signal

from app.core.beats import (
    BeatSeries,
    IbiSeries,
    build_ibi,
    derive_adr,
    derive_scg,
    detect_ao_peaks,
    detect_breath_cycles,
    detect_bvp_peaks,
    detect_r_peaks,
)
from app.core.constants import (
    BB_WINDOW,
    BLINK_MAD_FACTOR,
    BLINK_MIN_PROMINENCE,
    BLINK_REFRACTORY,
    BLINK_ROLLING_SECONDS,
    BROADBAND_LIMIT,
    DETREND_WINDOW,
    EMG_BAND,
    HF_BAND,
    IBI_BANDS,
    IBI_DERIVATIVE_BANDS,
    IBI_SCREENING,
    IBI_WINDOW,
    LF_BAND,
    LOG_EPSILON,
    MIN_EDA_DURATION,
    PNN_THRESHOLDS,
    RESP_HIGH_BAND,
    RESP_LOW_BAND,
    RRV_HF_BAND,
    RRV_LF_BAND,
    RSP_BAND,
    SCSR_CUTOFF,
    SCVSR_CUTOFF,
    SKT_BANDS,
    SLOW_SEGMENT_SECONDS,
    WELCH_SEGMENT,
)
from app.core.dsp import (
    BandSpec,
    PowerSpectrum,
    bandpass,
    lowpass,
    moving_average_detrend,
    resample_uniform,
    welch_psd,
)
from app.core.errors import InsufficientBeatsError, InsufficientDataError, MissingChannelError, ScgEmotionError
from app.core.hrv import (
    approximate_entropy,
    clipped_band_power,
    frequency_indices,
    ratio,
    spectrum,
    tachogram,
    time_domain_indices,
)
from app.core.models import Channel, DatasetFlavor, Scenario, TrialRecord, UniformSignal

# Initialize module logger
logger = logging.getLogger(__name__)

NAN = float("nan")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Ordered named features; missing values are NaN."""

    names: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        values = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if len(names) != len(values):
            raise ValueError(f"{len(names)} names for {len(values)} values")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, features: Mapping[str, float]) -> "FeatureVector":
        return cls(tuple(features), np.fromiter((float(v) for v in features.values()), dtype=float))

    @classmethod
    def missing(cls, names: Sequence[str]) -> "FeatureVector":
        return cls(tuple(names), np.full(len(names), NAN))

    @classmethod
    def concat(cls, parts: Iterable["FeatureVector"]) -> "FeatureVector":
        parts = list(parts)
        names = tuple(n for p in parts for n in p.names)
        values = np.concatenate([p.values for p in parts]) if parts else np.empty(0)
        return cls(names, values)

    def __len__(self) -> int:
        return len(self.names)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> Dict[str, float]:
        return OrderedDict(zip(self.names, self.values.tolist()))

    def namespaced(self, prefix: str) -> "FeatureVector":
        return FeatureVector(tuple(f"{prefix}.{n}" for n in self.names), self.values)

    @property
    def missing_count(self) -> int:
        return int(np.count_nonzero(np.isnan(self.values)))


@dataclass(frozen=True)
class FeatureSettings:
    """Tunable parts of feature extraction, populated from the experiment config."""

    extended: bool = True
    absolute_derivative: bool = False
    ibi_screening: bool = IBI_SCREENING
    ibi_window: Tuple[float, float] = IBI_WINDOW
    pnn_thresholds: Tuple[float, ...] = PNN_THRESHOLDS
    welch_segment: int = WELCH_SEGMENT
    slow_segment_seconds: float = SLOW_SEGMENT_SECONDS
    detrend_window: int = DETREND_WINDOW
    scsr_cutoff: float = SCSR_CUTOFF
    scvsr_cutoff: float = SCVSR_CUTOFF


DEFAULT_SETTINGS = FeatureSettings()


def _band_label(band: Tuple[float, float]) -> str:
    return f"{band[0]:g}-{band[1]:g}Hz"


# Feature name lists

CARDIAC_EXTENDED = (
    "CVNN", "CVSD", "HFn", "HTI", "IQRNN", "LFn", "LnHF", "MCVNN", "MadNN", "MaxNN",
    "MedianNN", "MinNN", "Prc20NN", "Prc80NN", "RMSSD", "SDRMSSD", "TINN", "TP",
)

RESPIRATORY_EXTENDED = (
    "CVSD", "RMSSD", "ApEn", "CVBB", "HF", "LF", "LFHF", "MCVBB", "MadBB", "SD1", "SDBB", "SDSD", "RVT",
)

EDA_NAMES = (
    "mean", "diff_mean", "decay_rate", "negative_fraction", "local_minima", "rise_time",
    f"power_{_band_label((0.0, BROADBAND_LIMIT))}",
    "scsr_zcr", "scvsr_zcr", "scsr_peak", "scvsr_peak",
)

SKT_NAMES = ("mean", "diff_mean", *(f"power_{_band_label(b)}" for b in SKT_BANDS))

EMG_NAMES = ("energy", "mean", "variance")

EOG_NAMES = (*EMG_NAMES, "blink_rate")


def _pnn_names(thresholds: Sequence[float]) -> List[str]:
    return [f"pNN{int(round(t * 1000))}" for t in thresholds]


def cardiac_feature_names(extended: bool, pnn_thresholds: Sequence[float] = PNN_THRESHOLDS) -> List[str]:
    names = [
        "ibi_mean", "ibi_std", "hr_mean", "hr_std", "ibi_diff_mean", "ibi_diff_std", "lf_hf_ratio",
        *(f"ibi_power_{_band_label(b)}" for b in IBI_BANDS),
        *(f"ibi_diff_power_{_band_label(b)}" for b in IBI_DERIVATIVE_BANDS),
    ]
    if extended:
        names += [*CARDIAC_EXTENDED, *_pnn_names(pnn_thresholds)]
    return names


def respiratory_feature_names(extended: bool) -> List[str]:
    names = [
        "mean", "std", "diff_mean", "rate", "interval_mean", "interval_median",
        "log_energy_diff", "spectral_centroid", f"power_{_band_label((0.0, BROADBAND_LIMIT))}",
    ]
    if extended:
        names += list(RESPIRATORY_EXTENDED)
    return names


def channel_feature_names(channel: Channel, extended: bool,
                          settings: FeatureSettings = DEFAULT_SETTINGS) -> List[str]:
    """Unprefixed names a channel contributes."""
    if channel in (Channel.ECG, Channel.BVP, Channel.SCG):
        return cardiac_feature_names(extended, settings.pnn_thresholds)
    if channel in (Channel.RSP, Channel.ADR):
        return respiratory_feature_names(extended)
    return list({
        Channel.EDA: EDA_NAMES, Channel.SKT: SKT_NAMES, Channel.EMG: EMG_NAMES, Channel.EOG: EOG_NAMES,
    }[channel])


def scenario_feature_names(scenario: Scenario, settings: FeatureSettings = DEFAULT_SETTINGS) -> List[str]:
    """Namespaced names of a scenario's feature vector, in output order."""
    extended = extended_for(scenario, settings)
    names = []
    for channel in scenario.channels():
        names += [f"{channel.value.lower()}.{n}" for n in channel_feature_names(channel, extended, settings)]
    return names


def extended_for(scenario: Scenario, settings: FeatureSettings) -> bool:
    return settings.extended and scenario.flavor is not DatasetFlavor.DEAP


# Cardiac

def cardiac_features(ibi: IbiSeries, extended: bool = True,
                     settings: FeatureSettings = DEFAULT_SETTINGS) -> FeatureVector:
    """
    IBI, heart-rate and tachogram band features of one cardiac channel.

    Args:
        ibi: Screened interval series
        extended: Add the heart-rate-variability index set
        settings: Extraction settings

    Returns:
        Unprefixed feature vector

    Raises:
        InsufficientBeatsError: If fewer than 4 intervals are available
    """
    intervals = np.asarray(ibi.intervals, dtype=float)
    onsets = np.asarray(ibi.onset_times, dtype=float)
    if len(intervals) < 4:
        raise InsufficientBeatsError(f"cardiac features need 4 intervals, got {len(intervals)}")

    heart_rate = 60.0 / intervals
    derivative = np.diff(intervals)
    if settings.absolute_derivative:
        derivative = np.abs(derivative)

    features = OrderedDict()
    features["ibi_mean"] = np.mean(intervals)
    features["ibi_std"] = np.std(intervals, ddof=1)
    features["hr_mean"] = np.mean(heart_rate)
    features["hr_std"] = np.std(heart_rate, ddof=1)
    features["ibi_diff_mean"] = np.mean(derivative)
    features["ibi_diff_std"] = np.std(derivative, ddof=1)

    ibi_psd = spectrum(tachogram(intervals, onsets), settings.welch_segment)
    features["lf_hf_ratio"] = ratio(clipped_band_power(ibi_psd, LF_BAND), clipped_band_power(ibi_psd, HF_BAND))
    for band in IBI_BANDS:
        features[f"ibi_power_{_band_label(band)}"] = clipped_band_power(ibi_psd, band)

    derivative_psd = spectrum(tachogram(derivative, onsets[1:]), settings.welch_segment)
    for band in IBI_DERIVATIVE_BANDS:
        features[f"ibi_diff_power_{_band_label(band)}"] = clipped_band_power(derivative_psd, band)

    if extended:
        indices = time_domain_indices(intervals, settings.pnn_thresholds)
        indices.update(frequency_indices(intervals, onsets, LF_BAND, HF_BAND, segment=settings.welch_segment))
        for name in CARDIAC_EXTENDED:
            features[name] = indices[name]
        for name in _pnn_names(settings.pnn_thresholds):
            features[name] = indices[name]
    return FeatureVector.from_mapping(features)


# Respiratory

def _slow_psd(sig: UniformSignal, settings: FeatureSettings) -> PowerSpectrum:
    segment = max(2, int(round(settings.slow_segment_seconds * sig.rate)))
    return welch_psd(sig, segment_len=segment)


def _broadband_power(psd: PowerSpectrum) -> float:
    """Power from the first non-DC bin up to the broadband limit."""
    if len(psd.freqs_hz) < 2:
        return NAN
    return clipped_band_power(psd, (float(psd.freqs_hz[1]), BROADBAND_LIMIT))


def _breath_amplitudes(x: np.ndarray, peaks: np.ndarray) -> np.ndarray:
    """Peak height above the trough since the previous peak."""
    return np.array([x[b] - np.min(x[a:b + 1]) for a, b in zip(peaks[:-1], peaks[1:])])


def respiratory_features(resp: UniformSignal, cycles: BeatSeries, extended: bool = True,
                         settings: FeatureSettings = DEFAULT_SETTINGS) -> FeatureVector:
    """
    Waveform, rate and spectral features of a respiratory channel.

    Spectral features are missing for a constant waveform; rate features
    only need the cycles.

    Raises:
        InsufficientDataError: If fewer than 3 cycles are available
    """
    times = np.asarray(cycles.event_times, dtype=float)
    if len(times) < 3:
        raise InsufficientDataError(f"respiratory features need 3 cycles, got {len(times)}")
    x = np.asarray(resp.samples, dtype=float)
    periods = np.diff(times)

    features = OrderedDict()
    features["mean"] = np.mean(x)
    features["std"] = np.std(x)
    features["diff_mean"] = np.mean(np.diff(x)) * resp.rate if x.size > 1 else NAN
    features["rate"] = 60.0 / np.mean(periods)
    features["interval_mean"] = np.mean(periods)
    features["interval_median"] = np.median(periods)

    if np.std(x) > 0:
        psd = _slow_psd(resp, settings)
        low = clipped_band_power(psd, RESP_LOW_BAND)
        high = clipped_band_power(psd, RESP_HIGH_BAND)
        features["log_energy_diff"] = np.log(low) - np.log(high + LOG_EPSILON) if low > 0 else NAN
        total = float(np.sum(psd.density))
        features["spectral_centroid"] = float(np.sum(psd.freqs_hz * psd.density) / total) if total > 0 else NAN
        features[f"power_{_band_label((0.0, BROADBAND_LIMIT))}"] = _broadband_power(psd)
    else:
        features["log_energy_diff"] = NAN
        features["spectral_centroid"] = NAN
        features[f"power_{_band_label((0.0, BROADBAND_LIMIT))}"] = NAN

    if extended:
        features.update(_breath_variability(resp, cycles, settings))
    return FeatureVector.from_mapping(features)


def _breath_variability(resp: UniformSignal, cycles: BeatSeries, settings: FeatureSettings) -> Dict[str, float]:
    out = OrderedDict((name, NAN) for name in RESPIRATORY_EXTENDED)
    try:
        bb = build_ibi(cycles, BB_WINDOW, settings.ibi_screening)
    except InsufficientBeatsError as e:
        logger.debug("Breath variability unavailable: %s", e)
        return out
    intervals = np.asarray(bb.intervals)
    indices = time_domain_indices(intervals, ())
    out["CVSD"] = indices["CVSD"]
    out["RMSSD"] = indices["RMSSD"]
    out["ApEn"] = approximate_entropy(intervals)
    out["CVBB"] = indices["CVNN"]
    out["MCVBB"] = indices["MCVNN"]
    out["MadBB"] = indices["MadNN"]
    out["SD1"] = indices["SD1"]
    out["SDBB"] = indices["SDNN"]
    out["SDSD"] = indices["SDSD"]
    spectral = frequency_indices(intervals, bb.onset_times, RRV_LF_BAND, RRV_HF_BAND,
                                 segment=settings.welch_segment)
    out["HF"] = spectral["HF"]
    out["LF"] = spectral["LF"]
    out["LFHF"] = spectral["LFHF"]

    x = np.asarray(resp.samples, dtype=float)
    peaks = np.clip(np.round((np.asarray(cycles.event_times) - resp.start_time) * resp.rate).astype(int),
                    0, len(x) - 1)
    amplitudes = _breath_amplitudes(x, peaks)
    out["RVT"] = ratio(float(np.mean(amplitudes)), float(np.mean(intervals))) if amplitudes.size else NAN
    return out


# Electrodermal activity

def _true_runs(mask: np.ndarray) -> np.ndarray:
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    return np.flatnonzero(np.diff(padded)).reshape(-1, 2)


def _zero_crossings(x: np.ndarray, scale: float) -> np.ndarray:
    """Indices i where the signal changes sign between i and i+1, ignoring numerical noise."""
    clean = np.where(np.abs(x) <= 1e-12 * max(scale, 1e-300), 0.0, x)
    signs = np.sign(clean)
    nonzero = np.flatnonzero(signs)
    if nonzero.size < 2:
        return np.empty(0, dtype=int)
    flips = signs[nonzero[1:]] != signs[nonzero[:-1]]
    return nonzero[1:][flips]


def _response_features(x: np.ndarray, rate: float, scale: float) -> Tuple[float, float]:
    crossings = _zero_crossings(x, scale)
    duration = len(x) / rate
    zcr = len(crossings) / duration if duration > 0 else NAN
    if len(crossings) < 2:
        return zcr, NAN
    peaks = [np.max(np.abs(x[a:b])) for a, b in zip(crossings[:-1], crossings[1:])]
    return zcr, float(np.mean(peaks))


def eda_features(eda: UniformSignal, raw: Optional[UniformSignal] = None,
                 settings: FeatureSettings = DEFAULT_SETTINGS) -> FeatureVector:
    """
    Level, slope, decay and slow-response features of electrodermal activity.

    Args:
        eda: Preprocessed (detrended) EDA
        raw: Unprocessed EDA the mean level is read from; defaults to `eda`
        settings: Extraction settings

    Raises:
        InsufficientDataError: If shorter than 20 s
    """
    if eda.duration < MIN_EDA_DURATION:
        raise InsufficientDataError(f"EDA features need {MIN_EDA_DURATION:g} s, got {eda.duration:.2f} s")
    x = np.asarray(eda.samples, dtype=float)
    level = np.asarray((raw if raw is not None else eda).samples, dtype=float)
    derivative = np.diff(x) * eda.rate
    falling = derivative < 0

    features = OrderedDict()
    features["mean"] = np.mean(level)
    features["diff_mean"] = np.mean(derivative)
    features["decay_rate"] = np.mean(derivative[falling]) if falling.any() else NAN
    features["negative_fraction"] = np.mean(falling)
    features["local_minima"] = float(len(sp_signal.find_peaks(-x)[0]))
    rising = _true_runs(derivative > 0)
    features["rise_time"] = float(np.mean(rising[:, 1] - rising[:, 0]) / eda.rate) if len(rising) else NAN

    if np.std(x) > 0:
        features[f"power_{_band_label((0.0, BROADBAND_LIMIT))}"] = _broadband_power(_slow_psd(eda, settings))
    else:
        features[f"power_{_band_label((0.0, BROADBAND_LIMIT))}"] = 0.0

    scale = float(np.max(np.abs(level))) if level.size else 0.0
    detrended = eda.with_samples(sp_signal.detrend(x, type="linear"))
    scsr = np.asarray(lowpass(detrended, settings.scsr_cutoff).samples)
    scvsr = np.asarray(lowpass(detrended, settings.scvsr_cutoff).samples)
    features["scsr_zcr"], features["scsr_peak"] = _response_features(scsr, eda.rate, scale)
    features["scvsr_zcr"], features["scvsr_peak"] = _response_features(scvsr, eda.rate, scale)
    return FeatureVector.from_mapping(OrderedDict((n, features[n]) for n in EDA_NAMES))


# Skin temperature

def skt_features(skt: UniformSignal, settings: FeatureSettings = DEFAULT_SETTINGS) -> FeatureVector:
    """Mean temperature, mean slope and low-frequency band powers."""
    x = np.asarray(skt.samples, dtype=float)
    if x.size == 0:
        raise InsufficientDataError("skin temperature signal is empty")
    features = OrderedDict()
    features["mean"] = np.mean(x)
    features["diff_mean"] = np.mean(np.diff(x)) * skt.rate if x.size > 1 else NAN
    psd = _slow_psd(skt, settings) if x.size > 1 else None
    for band in SKT_BANDS:
        features[f"power_{_band_label(band)}"] = clipped_band_power(psd, band) if psd is not None else NAN
    return FeatureVector.from_mapping(features)


# Muscle and eye activity

def emg_features(emg: UniformSignal) -> FeatureVector:
    """Energy (mean square), mean and variance."""
    x = np.asarray(emg.samples, dtype=float)
    if x.size == 0:
        raise InsufficientDataError("EMG signal is empty")
    return FeatureVector.from_mapping(OrderedDict(
        energy=float(np.mean(x ** 2)), mean=float(np.mean(x)), variance=float(np.var(x)),
    ))


def rolling_mad(x: np.ndarray, window: int) -> np.ndarray:
    """Centered rolling median absolute deviation."""
    window = max(1, int(window))
    median = ndimage.median_filter(x, size=window, mode="nearest")
    return ndimage.median_filter(np.abs(x - median), size=window, mode="nearest")


def detect_blinks(eog: UniformSignal,
                  mad_factor: float = BLINK_MAD_FACTOR,
                  min_prominence: float = BLINK_MIN_PROMINENCE,
                  refractory: float = BLINK_REFRACTORY) -> np.ndarray:
    """
    Sample indices of blink peaks.

    A local maximum is a blink when its prominence exceeds `mad_factor` times
    the rolling MAD around it and `min_prominence` times the median rolling
    MAD of the whole trial. Both floors scale with the signal.
    """
    x = np.asarray(eog.samples, dtype=float)
    if x.size < 3:
        return np.empty(0, dtype=int)
    spread = rolling_mad(x, int(round(BLINK_ROLLING_SECONDS * eog.rate)))
    distance = max(1, int(round(refractory * eog.rate)))
    floor = min_prominence * float(np.median(spread))
    candidates, props = sp_signal.find_peaks(x, distance=distance, prominence=floor)
    if candidates.size == 0:
        return candidates
    keep = props["prominences"] >= mad_factor * spread[candidates]
    return candidates[keep]


def eog_features(eog: UniformSignal, blink_source: Optional[UniformSignal] = None) -> FeatureVector:
    """
    EMG statistics plus blinks per minute.

    Args:
        eog: Preprocessed (band-passed) EOG for the statistics
        blink_source: Signal blinks are counted on; defaults to `eog`
    """
    base = emg_features(eog)
    source = blink_source if blink_source is not None else eog
    minutes = source.duration / 60.0
    rate = len(detect_blinks(source)) / minutes if minutes > 0 else NAN
    return FeatureVector(base.names + ("blink_rate",), np.append(base.values, rate))


# Assembly

def _uniform(channel: Channel, sig) -> UniformSignal:
    """Irregular channels are interpolated at their median sampling rate."""
    if isinstance(sig, UniformSignal):
        return sig
    steps = np.diff(sig.timestamps)
    step = float(np.median(steps)) if steps.size else 0.0
    if not step > 0:
        raise InsufficientDataError(f"{channel.value} has no usable sampling clock")
    logger.debug("Resampling irregular %s at %.3f Hz", channel.value, 1.0 / step)
    return resample_uniform(sig, 1.0 / step)


def extract_channel(trial: TrialRecord, channel: Channel, extended: bool,
                    settings: FeatureSettings = DEFAULT_SETTINGS) -> FeatureVector:
    """
    Preprocess one channel of a trial and compute its unprefixed features.

    Raises:
        MissingChannelError: If the trial does not carry the channel's source
    """
    source = channel.source
    if source not in trial.channels:
        raise MissingChannelError(channel, f"trial {trial.subject_id}/{trial.video_id} lacks {source.value}")
    sig = trial.channels[source]

    if channel is Channel.ECG:
        beats = detect_r_peaks(_uniform(channel, sig))
        return cardiac_features(build_ibi(beats, settings.ibi_window, settings.ibi_screening), extended, settings)
    if channel is Channel.BVP:
        beats = detect_bvp_peaks(_uniform(channel, sig), settings.detrend_window)
        return cardiac_features(build_ibi(beats, settings.ibi_window, settings.ibi_screening), extended, settings)
    if channel is Channel.SCG:
        beats = detect_ao_peaks(derive_scg(sig))
        return cardiac_features(build_ibi(beats, settings.ibi_window, settings.ibi_screening), extended, settings)
    if channel is Channel.RSP:
        resp = bandpass(_uniform(channel, sig), BandSpec.of(RSP_BAND))
        return respiratory_features(resp, detect_breath_cycles(resp), extended, settings)
    if channel is Channel.ADR:
        resp = derive_adr(sig)
        return respiratory_features(resp, detect_breath_cycles(resp), extended, settings)
    if channel is Channel.EDA:
        raw = _uniform(channel, sig)
        return eda_features(moving_average_detrend(raw, settings.detrend_window), raw, settings)
    if channel is Channel.SKT:
        return skt_features(_uniform(channel, sig), settings)
    if channel is Channel.EMG:
        return emg_features(bandpass(_uniform(channel, sig), BandSpec.of(EMG_BAND)))
    if channel is Channel.EOG:
        raw = _uniform(channel, sig)
        return eog_features(bandpass(raw, BandSpec.of(EMG_BAND)), raw)
    raise ValueError(f"no feature extractor for {channel.value}")


def channel_features(trial: TrialRecord, channel: Channel, extended: bool,
                     settings: FeatureSettings = DEFAULT_SETTINGS) -> FeatureVector:
    """
    Namespaced features of one channel, NaN-filled when extraction fails.

    Raises:
        MissingChannelError: If the trial does not carry the channel's source
    """
    try:
        vector = extract_channel(trial, channel, extended, settings)
    except MissingChannelError:
        raise
    except ScgEmotionError as e:
        logger.warning("%s features missing for %s/%s: %s",
                       channel.value, trial.subject_id, trial.video_id, e)
        vector = FeatureVector.missing(channel_feature_names(channel, extended, settings))
    return vector.namespaced(channel.value.lower())


def assemble_features(trial: TrialRecord, scenario: Scenario,
                      settings: FeatureSettings = DEFAULT_SETTINGS) -> FeatureVector:
    """
    Feature vector of a trial under an input scenario.

    Channels are concatenated in the scenario's order. A channel whose
    extraction fails (no beats, too few intervals) contributes missing values
    and a warning; a channel that is absent raises.

    Args:
        trial: Validated trial
        scenario: Input scenario
        settings: Extraction settings; extended indices apply to cardiac and
            respiratory channels of non-DEAP runs only

    Returns:
        Namespaced feature vector

    Raises:
        MissingChannelError: If a required channel is absent
    """
    extended = extended_for(scenario, settings)
    for channel in scenario.required_channels():
        if channel not in trial.channels:
            raise MissingChannelError(channel, f"trial {trial.subject_id}/{trial.video_id} lacks {channel.value}")
    return FeatureVector.concat(channel_features(trial, channel, extended, settings)
                                for channel in scenario.channels())
