import numpy as np
import pytest

from app.core.beats import (
    BeatKind,
    BeatSeries,
    build_ibi,
    derive_adr,
    derive_scg,
    detect_ao_peaks,
    detect_breath_cycles,
    detect_bvp_peaks,
    detect_r_peaks,
)
from app.core.errors import EmptyBeatsError, InsufficientBeatsError, InsufficientDataError
from app.core.models import IrregularSignal, UniformSignal
from app.core.synthetic import _stamp, beat_times, breathing_phase, ecg_shape, pulse_shape, scg_shape

from conftest import sine

BEATS = np.arange(0.5, 29.5, 0.8)


def ecg(rate=256.0, duration=30.0):
    t = np.arange(int(rate * duration)) / rate
    return UniformSignal(_stamp(t, BEATS, ecg_shape, (-0.3, 0.45)), rate)


def chest_acceleration(duration=30.0, breath_hz=0.25, seed=0, beats=BEATS):
    rng = np.random.default_rng(seed)
    n = int(400 * duration)
    t = (np.arange(n) + rng.uniform(-0.25, 0.25, n)) / 400.0
    t[0] = max(t[0], 0.0)
    values = 0.98 + 0.004 * np.sin(2 * np.pi * breath_hz * t) + 0.01 * _stamp(t, beats, scg_shape, (0.0, 0.45))
    return IrregularSignal(t, values)


def raised_cosine_train(beats, rate=64.0, duration=60.0, width=0.4):
    t = np.arange(int(rate * duration)) / rate
    return _stamp(t, beats, lambda s: 0.5 * (1.0 - np.cos(2 * np.pi * s / width)), (0.0, width))


def sweep_beats(heart_rate, seed, duration=60.0):
    rng = np.random.default_rng(seed)
    return rng, beat_times(heart_rate, duration, breathing_phase(0.25, float(rng.uniform(0, 2 * np.pi))), rng)


SWEEP_RATES = np.linspace(50.0, 120.0, 11)


def sample_indices(beats, sig):
    return np.round((beats.event_times - sig.start_time) * sig.rate).astype(int)


class TestCardiacDetectors:
    def test_r_peaks_land_on_the_beats(self):
        beats = detect_r_peaks(ecg())
        assert beats.kind is BeatKind.R_PEAK
        assert abs(len(beats) - len(BEATS)) <= 1
        nearest = np.abs(beats.event_times[:, None] - BEATS[None, :]).min(axis=1)
        assert nearest.max() < 0.015

    def test_ao_peaks_follow_the_beats(self):
        beats = detect_ao_peaks(derive_scg(chest_acceleration()))
        assert abs(len(beats) - len(BEATS)) <= 1
        assert np.median(np.diff(beats.event_times)) == pytest.approx(0.8, abs=0.02)

    def test_pulse_peaks(self):
        rate = 64.0
        t = np.arange(int(rate * 30)) / rate
        bvp = UniformSignal(_stamp(t, BEATS, pulse_shape, (0.0, 1.0)), rate)
        beats = detect_bvp_peaks(bvp)
        assert abs(len(beats) - len(BEATS)) <= 1
        assert np.median(np.diff(beats.event_times)) == pytest.approx(0.8, abs=0.02)

    def test_raised_cosine_pulses(self):
        bvp = UniformSignal(raised_cosine_train(np.arange(0.2, 59.5, 1 / 1.2)), 64.0)
        assert np.median(np.diff(detect_bvp_peaks(bvp).event_times)) == pytest.approx(1 / 1.2, abs=0.01)

    def test_pulse_peaks_ignore_slow_drift(self):
        rate = 64.0
        clean = raised_cosine_train(np.arange(2.5, 57.0, 1 / 1.2), rate)
        t = np.arange(clean.size) / rate
        reference = UniformSignal(clean, rate)
        drifting = UniformSignal(clean + 5.0 * np.sin(2 * np.pi * 0.05 * t) + 0.3 * t / 60.0, rate)
        expected = sample_indices(detect_bvp_peaks(reference), reference)
        found = sample_indices(detect_bvp_peaks(drifting), drifting)
        assert found.size == expected.size
        assert np.abs(found - expected).max() <= 1

    @pytest.mark.parametrize("scale", [1e-3, 1e3])
    def test_detectors_do_not_depend_on_amplitude(self, scale):
        rng = np.random.default_rng(6)
        bvp_samples = _stamp(np.arange(64 * 30) / 64.0, BEATS, pulse_shape, (0.0, 1.0)) + rng.normal(0, 0.02, 64 * 30)
        acc = chest_acceleration()
        cases = [
            (detect_r_peaks, ecg()),
            (detect_ao_peaks, derive_scg(acc)),
            (detect_bvp_peaks, UniformSignal(bvp_samples, 64.0)),
            (detect_breath_cycles, sine(0.25, 25.0, 60.0)),
        ]
        for detector, sig in cases:
            reference = detector(sig)
            scaled = detector(sig.with_samples(scale * np.asarray(sig.samples)))
            assert len(scaled) == len(reference), detector.__name__
            np.testing.assert_allclose(scaled.event_times, reference.event_times, atol=1.0 / sig.rate)

    def test_shifting_the_start_shifts_the_events(self):
        bvp = UniformSignal(raised_cosine_train(np.arange(0.2, 29.5, 0.8), duration=30.0), 64.0)
        moved = UniformSignal(bvp.samples, bvp.rate, start_time=12.5)
        np.testing.assert_allclose(detect_bvp_peaks(moved).event_times,
                                   detect_bvp_peaks(bvp).event_times + 12.5)

    def test_flat_signal_has_no_beats(self):
        with pytest.raises(EmptyBeatsError):
            detect_r_peaks(UniformSignal(np.full(2560, 0.3), 256.0))

    def test_short_signal_is_rejected(self):
        with pytest.raises(InsufficientDataError):
            detect_bvp_peaks(UniformSignal(np.random.default_rng(0).normal(size=64 * 3), 64.0))

    def test_scg_is_resampled_to_200_hz(self):
        scg = derive_scg(chest_acceleration(duration=10.0))
        assert scg.rate == 200.0
        assert scg.duration == pytest.approx(10.0, abs=0.02)


@pytest.mark.slow
class TestHeartRateSweep:
    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("heart_rate", SWEEP_RATES)
    def test_pulse_waveform(self, heart_rate, seed):
        rng, beats = sweep_beats(heart_rate, seed)
        t = np.arange(64 * 60) / 64.0
        bvp = UniformSignal(_stamp(t, beats, pulse_shape, (0.0, 1.0)) + rng.normal(0.0, 0.02, t.size), 64.0)
        assert abs(len(detect_bvp_peaks(bvp)) - len(beats)) <= 2

    @pytest.mark.parametrize("noise", [0.01, 0.02])
    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("heart_rate", SWEEP_RATES)
    def test_raised_cosine_pulses(self, heart_rate, seed, noise):
        beats = np.arange(0.3, 59.4, 60.0 / heart_rate)
        samples = raised_cosine_train(beats)
        bvp = UniformSignal(samples + np.random.default_rng(seed).normal(0.0, noise, samples.size), 64.0)
        assert abs(len(detect_bvp_peaks(bvp)) - len(beats)) <= 2

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("heart_rate", SWEEP_RATES)
    def test_r_peaks(self, heart_rate, seed):
        rng, beats = sweep_beats(heart_rate, seed)
        t = np.arange(256 * 60) / 256.0
        sig = UniformSignal(_stamp(t, beats, ecg_shape, (-0.3, 0.45)) + rng.normal(0.0, 0.01, t.size), 256.0)
        assert abs(len(detect_r_peaks(sig)) - len(beats)) <= 2

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("heart_rate", SWEEP_RATES)
    def test_ao_peaks(self, heart_rate, seed):
        _, beats = sweep_beats(heart_rate, seed)
        scg = derive_scg(chest_acceleration(duration=60.0, seed=seed, beats=beats))
        assert abs(len(detect_ao_peaks(scg)) - len(beats)) <= 2

    @pytest.mark.parametrize("breath_hz", np.linspace(0.16, 0.34, 7))
    def test_adr_breathing_rate(self, breath_hz):
        cycles = detect_breath_cycles(derive_adr(chest_acceleration(duration=60.0, breath_hz=breath_hz)))
        assert 1.0 / np.median(np.diff(cycles.event_times)) == pytest.approx(breath_hz, rel=0.05)


class TestRespiration:
    def test_breathing_rate_of_a_sinusoid(self):
        cycles = detect_breath_cycles(sine(0.25, 25.0, 60.0))
        assert 60.0 / np.mean(np.diff(cycles.event_times)) == pytest.approx(15.0, abs=0.1)

    def test_adr_recovers_the_breathing_rhythm(self):
        adr = derive_adr(chest_acceleration(duration=60.0))
        cycles = detect_breath_cycles(adr)
        assert np.median(np.diff(cycles.event_times)) == pytest.approx(4.0, abs=0.3)

    def test_adr_needs_twenty_seconds(self):
        with pytest.raises(InsufficientDataError):
            derive_adr(chest_acceleration(duration=15.0))

    def test_flat_waveform(self):
        with pytest.raises(EmptyBeatsError):
            detect_breath_cycles(UniformSignal(np.zeros(500), 25.0))


class TestIntervals:
    def test_implausible_intervals_are_rejected(self):
        ibi = build_ibi(BeatSeries([0.0, 1.0, 1.05, 2.05], BeatKind.R_PEAK))
        np.testing.assert_allclose(ibi.intervals, [1.0, 1.0])
        np.testing.assert_allclose(ibi.onset_times, [0.0, 1.05])
        assert ibi.rejected_count == 1
        assert ibi.span == pytest.approx(2.05)

    def test_screening_can_be_disabled(self):
        ibi = build_ibi(BeatSeries([0.0, 1.0, 1.05, 2.05], BeatKind.R_PEAK), screening=False)
        assert len(ibi) == 3 and ibi.rejected_count == 0

    def test_too_few_events(self):
        with pytest.raises(InsufficientBeatsError):
            build_ibi(BeatSeries([0.0, 1.0], BeatKind.PULSE_PEAK))

    def test_too_few_plausible_intervals(self):
        with pytest.raises(InsufficientBeatsError):
            build_ibi(BeatSeries([0.0, 0.1, 0.2, 3.0], BeatKind.AO_PEAK))

    def test_events_must_increase(self):
        with pytest.raises(ValueError):
            BeatSeries([0.0, 2.0, 1.0], BeatKind.BREATH_PEAK)
