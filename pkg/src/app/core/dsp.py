"""
Numerical kernels shared by every signal chain.

Resampling, zero-phase Butterworth filtering, Hilbert envelopes, centered
moving-average detrending and Welch spectra. All functions are pure.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import signal as sp_signal
from scipy.integrate import trapezoid

from app.core.constants import FILTER_ORDER, MIN_ENVELOPE_LENGTH, PAD_FACTOR, WELCH_OVERLAP, WELCH_SEGMENT
from app.core.errors import InsufficientDataError, InvalidBandError
from app.core.models import IrregularSignal, UniformSignal


@dataclass(frozen=True)
class BandSpec:
    """Frequency band in Hz. A zero lower edge means low-pass."""

    low_hz: float
    high_hz: float

    def __post_init__(self):
        if not (self.low_hz >= 0 and self.high_hz > self.low_hz):
            raise InvalidBandError(f"invalid band {self.low_hz}-{self.high_hz} Hz")

    @classmethod
    def of(cls, band: Tuple[float, float]) -> "BandSpec":
        return cls(float(band[0]), float(band[1]))

    def __str__(self) -> str:
        return f"{self.low_hz:g}-{self.high_hz:g} Hz"


@dataclass(frozen=True, eq=False)
class PowerSpectrum:
    """One-sided power spectral density (units^2/Hz) on an increasing grid from 0 Hz."""

    freqs_hz: np.ndarray
    density: np.ndarray

    @property
    def nyquist(self) -> float:
        return float(self.freqs_hz[-1])

    @property
    def total_power(self) -> float:
        return float(trapezoid(self.density, self.freqs_hz))


def resample_uniform(sig: IrregularSignal, target_rate: float) -> UniformSignal:
    """
    Linearly interpolate an irregular series onto a uniform grid.

    The grid runs from the first timestamp up to the last one; nothing is
    extrapolated beyond the endpoints.

    Args:
        sig: Irregular series with strictly increasing timestamps
        target_rate: Output sampling rate in Hz

    Returns:
        Uniform series starting at the first timestamp
    """
    if target_rate <= 0:
        raise ValueError(f"target rate must be positive, got {target_rate}")
    if len(sig) < 2:
        raise InsufficientDataError("resampling needs at least two points")
    t0 = float(sig.timestamps[0])
    span = float(sig.timestamps[-1]) - t0
    count = int(np.floor(span * target_rate + 1e-9)) + 1
    grid = t0 + np.arange(count) / target_rate
    values = np.interp(grid, sig.timestamps, sig.values)
    return UniformSignal(values, target_rate, t0)


def _design(band: BandSpec, rate: float, order: int) -> np.ndarray:
    nyquist = rate / 2.0
    if band.high_hz >= nyquist:
        raise InvalidBandError(f"band {band} reaches Nyquist ({nyquist:g} Hz)")
    if band.low_hz > 0:
        return sp_signal.butter(order, [band.low_hz, band.high_hz], btype="bandpass", fs=rate, output="sos")
    return sp_signal.butter(order, band.high_hz, btype="lowpass", fs=rate, output="sos")


def _filtfilt(sos: np.ndarray, samples: np.ndarray) -> np.ndarray:
    # even padding of PAD_FACTOR x the filter length, trimmed after the pass
    taps = 2 * sos.shape[0] + 1
    padlen = min(PAD_FACTOR * taps, len(samples) - 1)
    if padlen <= 0:
        return sp_signal.sosfiltfilt(sos, samples, padtype=None)
    return sp_signal.sosfiltfilt(sos, samples, padtype="even", padlen=padlen)


def bandpass(sig: UniformSignal, band: BandSpec, order: int = FILTER_ORDER) -> UniformSignal:
    """
    Zero-phase Butterworth band-pass (forward-backward).

    Args:
        sig: Input series
        band: Pass-band; a zero lower edge designs a low-pass instead
        order: Butterworth order of the single pass

    Returns:
        Filtered series of the same length and rate

    Raises:
        InvalidBandError: If the band reaches the Nyquist frequency
    """
    sos = _design(band, sig.rate, order)
    return sig.with_samples(_filtfilt(sos, np.asarray(sig.samples)))


def lowpass(sig: UniformSignal, cutoff_hz: float, order: int = FILTER_ORDER) -> UniformSignal:
    """Zero-phase Butterworth low-pass."""
    return bandpass(sig, BandSpec(0.0, cutoff_hz), order)


def hilbert_envelope(sig: UniformSignal) -> UniformSignal:
    """Magnitude of the analytic signal."""
    if len(sig) < MIN_ENVELOPE_LENGTH:
        raise InsufficientDataError(f"envelope needs at least {MIN_ENVELOPE_LENGTH} samples")
    return sig.with_samples(np.abs(sp_signal.hilbert(np.asarray(sig.samples))))


def centered_moving_average(samples: np.ndarray, window: int) -> np.ndarray:
    """
    Centered moving mean with symmetric truncation at the edges.

    Even windows use half weights on the two outermost taps so the filter stays
    centered on the sample.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n == 0:
        return x.copy()
    half = window // 2
    idx = np.arange(n)
    reach = np.minimum(np.minimum(idx, n - 1 - idx), half)
    csum = np.concatenate(([0.0], np.cumsum(x)))

    # symmetric windows of odd length 2r+1
    out = (csum[idx + reach + 1] - csum[idx - reach]) / (2 * reach + 1)
    if window % 2 == 0 and half > 0:
        full = reach == half
        i = idx[full]
        inner = csum[i + half] - csum[i - half + 1]
        out[full] = (inner + 0.5 * (x[i - half] + x[i + half])) / window
    return out


def moving_average_detrend(sig: UniformSignal, window: int) -> UniformSignal:
    """Subtract the centered moving mean over `window` samples."""
    trend = centered_moving_average(sig.samples, window)
    return sig.with_samples(np.asarray(sig.samples) - trend)


def welch_psd(sig: UniformSignal, segment_len: int = WELCH_SEGMENT,
              overlap_fraction: float = WELCH_OVERLAP, detrend: Optional[str] = "constant") -> PowerSpectrum:
    """
    Hann-windowed averaged periodogram.

    Segments longer than the signal fall back to one full-length segment.

    Args:
        sig: Input series
        segment_len: Samples per segment
        overlap_fraction: Fraction of overlap between segments, in [0, 1)
        detrend: Per-segment detrending passed to scipy ("constant" removes the mean)

    Returns:
        One-sided density spectrum
    """
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError(f"overlap must be in [0, 1), got {overlap_fraction}")
    n = len(sig)
    if n < 2:
        raise InsufficientDataError("spectrum needs at least two samples")
    nperseg = int(min(max(segment_len, 2), n))
    noverlap = int(overlap_fraction * nperseg)
    freqs, density = sp_signal.welch(
        np.asarray(sig.samples), fs=sig.rate, window="hann", nperseg=nperseg, noverlap=noverlap,
        detrend=detrend if detrend else False, scaling="density", average="mean",
    )
    return PowerSpectrum(freqs, np.maximum(density, 0.0))


def band_power(psd: PowerSpectrum, band: BandSpec) -> float:
    """
    Trapezoidal integral of the density over [low, high].

    The density is treated as piecewise linear between bins, so the integral
    is additive over adjacent bands.

    Raises:
        InvalidBandError: If the band leaves the spectrum's frequency range
    """
    freqs = psd.freqs_hz
    tolerance = 1e-9 * max(freqs[-1], 1.0)
    if band.low_hz < freqs[0] - tolerance or band.high_hz > freqs[-1] + tolerance:
        raise InvalidBandError(f"band {band} outside spectrum 0-{freqs[-1]:g} Hz")
    low = max(band.low_hz, freqs[0])
    high = min(band.high_hz, freqs[-1])
    inside = (freqs > low) & (freqs < high)
    grid = np.concatenate(([low], freqs[inside], [high]))
    values = np.interp(grid, freqs, psd.density)
    return float(max(trapezoid(values, grid), 0.0))
