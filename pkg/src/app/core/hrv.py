"""
Interval-series indices shared by heart-beat (IBI) and breath-to-breath (BB) series.

Distribution, geometric and entropy indices come from NeuroKit2; pNNx and the
spectral indices work on the tachogram, the interval series linearly
interpolated to a uniform 4 Hz grid at the interval onsets.
"""

import warnings
from collections import OrderedDict
from typing import Dict, Sequence, Tuple

import neurokit2 as nk
import numpy as np

from app.core.constants import (
    APEN_ORDER,
    APEN_TOLERANCE,
    HISTOGRAM_BIN,
    PNN_THRESHOLDS,
    TACHOGRAM_RATE,
    TOTAL_POWER_LIMIT,
    WELCH_SEGMENT,
)
from app.core.dsp import BandSpec, PowerSpectrum, band_power, resample_uniform, welch_psd
from app.core.errors import InsufficientDataError
from app.core.models import IrregularSignal, UniformSignal

# NeuroKit2 reports these in milliseconds; everything here is in seconds
DURATION_INDICES = (
    "MeanNN", "SDNN", "RMSSD", "SDSD", "MedianNN", "MadNN", "IQRNN",
    "Prc20NN", "Prc80NN", "MinNN", "MaxNN", "TINN",
)
RATIO_INDICES = ("CVNN", "CVSD", "SDRMSSD", "MCVNN", "HTI")


def ratio(numerator: float, denominator: float) -> float:
    """Quotient, missing (NaN) when the denominator is zero or either side is missing."""
    if not np.isfinite(numerator) or not np.isfinite(denominator) or denominator == 0:
        return float("nan")
    return float(numerator / denominator)


def tachogram(intervals: np.ndarray, onset_times: np.ndarray, rate: float = TACHOGRAM_RATE) -> UniformSignal:
    """Interval values interpolated onto a uniform grid spanning the onsets."""
    return resample_uniform(IrregularSignal(onset_times, intervals), rate)


def spectrum(series: UniformSignal, segment: int = WELCH_SEGMENT) -> PowerSpectrum:
    return welch_psd(series, segment_len=segment)


def clipped_band_power(psd: PowerSpectrum, band: Tuple[float, float]) -> float:
    """Band power with the upper edge clipped to the spectrum's highest bin."""
    high = min(band[1], psd.nyquist)
    low = min(band[0], high)
    if high <= low:
        return 0.0
    return band_power(psd, BandSpec(low, high))


def successive_differences(intervals: np.ndarray) -> np.ndarray:
    return np.diff(np.asarray(intervals, dtype=float))


def pnn(intervals: np.ndarray, threshold: float) -> float:
    """Percentage of absolute successive differences strictly above `threshold` seconds."""
    diffs = np.abs(successive_differences(intervals))
    if diffs.size == 0:
        return float("nan")
    return float(100.0 * np.count_nonzero(diffs > threshold) / diffs.size)


def neurokit_time_indices(intervals: Sequence[float], bin_width: float = HISTOGRAM_BIN) -> Dict[str, float]:
    """
    NeuroKit2 time-domain indices of a contiguous interval list (seconds in, seconds out).

    The intervals are laid end to end so no gap is flagged as missing and
    difference-based indices run over the whole list.
    """
    x = np.asarray(intervals, dtype=float)
    rri = {"RRI": x * 1000.0, "RRI_Time": np.cumsum(x)}
    with warnings.catch_warnings():
        # window indices (SDANN and friends) complain about short recordings
        warnings.simplefilter("ignore")
        frame = nk.hrv_time(rri, sampling_rate=1000, show=False, binsize=bin_width * 1000.0)
    row = frame.iloc[0]
    indices = {name: float(row[f"HRV_{name}"]) / 1000.0 for name in DURATION_INDICES}
    indices.update({name: float(row[f"HRV_{name}"]) for name in RATIO_INDICES})
    return indices


def approximate_entropy(series: np.ndarray, order: int = APEN_ORDER, tolerance: float = APEN_TOLERANCE) -> float:
    """Approximate entropy with tolerance r = tolerance * std (ddof=1) of the series."""
    x = np.asarray(series, dtype=float)
    if x.size <= order + 1:
        return float("nan")
    apen, _ = nk.entropy_approximate(x, delay=1, dimension=order, tolerance=tolerance * np.std(x, ddof=1))
    return float(apen)


def time_domain_indices(intervals: Sequence[float],
                        pnn_thresholds: Sequence[float] = PNN_THRESHOLDS) -> Dict[str, float]:
    """
    Distribution and variability indices of an interval list (seconds).

    Keys follow the NN naming of heart-rate variability; the respiratory
    chain renames them for breath-to-breath series.
    """
    x = np.asarray(intervals, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("interval indices need at least two intervals")
    nk_indices = neurokit_time_indices(x)

    indices = OrderedDict()
    for name in ("MeanNN", "SDNN", "RMSSD", "SDSD"):
        indices[name] = nk_indices[name]
    indices["SD1"] = nk_indices["RMSSD"] / np.sqrt(2.0)
    for name in ("CVNN", "CVSD", "SDRMSSD", "MedianNN", "MadNN", "MCVNN", "IQRNN",
                 "Prc20NN", "Prc80NN", "MinNN", "MaxNN"):
        indices[name] = nk_indices[name]
    for threshold in pnn_thresholds:
        indices[f"pNN{int(round(threshold * 1000))}"] = pnn(x, threshold)
    indices["HTI"] = nk_indices["HTI"]
    indices["TINN"] = nk_indices["TINN"]
    return indices


def frequency_indices(intervals: np.ndarray, onset_times: np.ndarray,
                      lf_band: Tuple[float, float], hf_band: Tuple[float, float],
                      total_limit: float = TOTAL_POWER_LIMIT,
                      segment: int = WELCH_SEGMENT) -> Dict[str, float]:
    """LF/HF-family indices of the interval tachogram."""
    psd = spectrum(tachogram(intervals, onset_times), segment)
    lf = clipped_band_power(psd, lf_band)
    hf = clipped_band_power(psd, hf_band)
    indices = OrderedDict()
    indices["LF"] = lf
    indices["HF"] = hf
    indices["LFHF"] = ratio(lf, hf)
    indices["LFn"] = ratio(lf, lf + hf)
    indices["HFn"] = ratio(hf, lf + hf)
    indices["LnHF"] = float(np.log(hf)) if hf > 0 else float("nan")
    indices["TP"] = clipped_band_power(psd, (0.0, total_limit))
    return indices
