import logging

import numpy as np
import pytest

from app.core.beats import BeatKind, BeatSeries, IbiSeries, detect_breath_cycles
from app.core.errors import InsufficientBeatsError, InsufficientDataError, MissingChannelError
from app.core.features import (
    DEFAULT_SETTINGS,
    EDA_NAMES,
    FeatureSettings,
    FeatureVector,
    assemble_features,
    cardiac_feature_names,
    cardiac_features,
    detect_blinks,
    eda_features,
    emg_features,
    eog_features,
    extended_for,
    extract_channel,
    respiratory_feature_names,
    respiratory_features,
    scenario_feature_names,
    skt_features,
)
from app.core.dsp import BandSpec, bandpass
from app.core.models import Channel, DatasetFlavor, IrregularSignal, Peripherals, Scenario, UniformSignal
from app.core.synthetic import _stamp, blink_shape, pulse_shape

from conftest import make_trial, sine


def ibi_series(n=60, mean=0.8, swing=0.05):
    onsets = np.cumsum(np.full(n, mean)) - mean
    return IbiSeries(mean + swing * np.sin(2 * np.pi * 0.25 * onsets), onsets)


class TestFeatureVector:
    def test_names_must_be_unique(self):
        with pytest.raises(ValueError):
            FeatureVector(("a", "a"), [1.0, 2.0])

    def test_concat_and_namespace(self):
        left = FeatureVector.from_mapping({"a": 1.0, "b": 2.0}).namespaced("ecg")
        right = FeatureVector.missing(["c"]).namespaced("rsp")
        joined = FeatureVector.concat([left, right])
        assert joined.names == ("ecg.a", "ecg.b", "rsp.c")
        assert joined["ecg.b"] == 2.0
        assert joined.missing_count == 1


class TestCardiac:
    def test_heart_rate_and_layout(self):
        features = cardiac_features(ibi_series())
        assert list(features.names) == cardiac_feature_names(True)
        assert features["ibi_mean"] == pytest.approx(0.8, abs=0.01)
        assert features["hr_mean"] == pytest.approx(75.0, abs=1.0)
        assert features["ibi_power_0.2-0.3Hz"] > features["ibi_power_0.1-0.2Hz"]

    def test_basic_set_without_extended_indices(self):
        features = cardiac_features(ibi_series(), extended=False)
        assert list(features.names) == cardiac_feature_names(False)
        assert "RMSSD" not in features.names

    def test_absolute_derivative(self):
        signed = cardiac_features(ibi_series(), extended=False)
        absolute = cardiac_features(ibi_series(), extended=False,
                                    settings=FeatureSettings(absolute_derivative=True))
        assert absolute["ibi_diff_mean"] > abs(signed["ibi_diff_mean"])

    def test_needs_four_intervals(self):
        with pytest.raises(InsufficientBeatsError):
            cardiac_features(IbiSeries([0.8, 0.8, 0.8], [0.0, 0.8, 1.6]))


class TestRespiratory:
    def test_rate_of_steady_breathing(self):
        resp = sine(0.25, 25.0, 60.0)
        features = respiratory_features(resp, detect_breath_cycles(resp))
        assert list(features.names) == respiratory_feature_names(True)
        assert features["rate"] == pytest.approx(15.0, abs=0.1)
        assert features["interval_median"] == pytest.approx(4.0, abs=0.05)
        assert features["RVT"] > 0

    def test_needs_three_cycles(self):
        resp = sine(0.25, 25.0, 60.0)
        with pytest.raises(InsufficientDataError):
            respiratory_features(resp, BeatSeries([1.0, 5.0], BeatKind.BREATH_PEAK))


class TestPeripherals:
    def test_eda_level_from_raw_signal(self):
        rate = 32.0
        t = np.arange(int(40 * rate)) / rate
        raw = UniformSignal(5.0 + 0.1 * np.sin(2 * np.pi * 0.05 * t), rate)
        detrended = raw.with_samples(raw.samples - 5.0)
        features = eda_features(detrended, raw)
        assert list(features.names) == list(EDA_NAMES)
        assert features["mean"] == pytest.approx(5.0, abs=0.01)
        assert 0.3 < features["negative_fraction"] < 0.7

    def test_eda_needs_twenty_seconds(self):
        with pytest.raises(InsufficientDataError):
            eda_features(UniformSignal(np.ones(32 * 10), 32.0))

    def test_skin_temperature(self):
        features = skt_features(UniformSignal(33.0 + 0.01 * np.arange(240) / 4.0, 4.0))
        assert features["mean"] == pytest.approx(33.0 + 0.01 * 239 / 8.0)
        assert features["diff_mean"] == pytest.approx(0.01)

    def test_emg_statistics(self):
        features = emg_features(UniformSignal(np.array([1.0, -1.0, 3.0, -3.0]), 128.0))
        assert features["energy"] == pytest.approx(5.0)
        assert features["mean"] == 0.0
        assert features["variance"] == pytest.approx(5.0)

    def test_blinks_per_minute(self):
        rate, duration = 128.0, 30.0
        t = np.arange(int(rate * duration)) / rate
        blinks = np.array([4.0, 11.0, 17.5, 25.0])
        noise = np.random.default_rng(2).normal(0.0, 5.0, t.size)
        eog = UniformSignal(200.0 * _stamp(t, blinks, blink_shape, (-0.3, 0.3)) + noise, rate)
        assert len(detect_blinks(eog)) == 4
        assert eog_features(eog)["blink_rate"] == pytest.approx(8.0)

    @pytest.mark.parametrize("scale", [0.01, 1e-4, 100.0])
    def test_blinks_do_not_depend_on_units(self, scale):
        rate, duration = 128.0, 30.0
        t = np.arange(int(rate * duration)) / rate
        noise = np.random.default_rng(2).normal(0.0, 5.0, t.size)
        samples = 200.0 * _stamp(t, np.array([4.0, 11.0, 17.5, 25.0]), blink_shape, (-0.3, 0.3)) + noise
        reference = detect_blinks(UniformSignal(samples, rate))
        scaled = UniformSignal(scale * samples, rate)
        np.testing.assert_array_equal(detect_blinks(scaled), reference)
        assert eog_features(scaled)["blink_rate"] == pytest.approx(8.0)

    def test_twelve_blinks_a_minute(self):
        rate, duration = 128.0, 60.0
        t = np.arange(int(rate * duration)) / rate
        blinks = np.arange(2.5, 60.0, 5.0) + np.random.default_rng(4).uniform(-1.0, 1.0, 12)
        noise = np.random.default_rng(5).normal(0.0, 10.0, t.size)
        eog = UniformSignal(200.0 * _stamp(t, blinks, blink_shape, (-0.3, 0.3)) + noise, rate)
        assert eog_features(eog)["blink_rate"] == pytest.approx(12.0, abs=1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_noise_alone_has_no_blinks(self, seed):
        rate = 128.0
        white = UniformSignal(np.random.default_rng(seed).normal(0.0, 20.0, int(rate * 60)), rate)
        smooth = bandpass(white, BandSpec.of((0.5, 10.0)))
        for eog in (white, smooth):
            assert len(detect_blinks(eog)) == 0
            assert eog_features(eog)["blink_rate"] == 0.0

    def test_zero_eog(self):
        features = eog_features(UniformSignal(np.zeros(128 * 30), 128.0))
        assert features["blink_rate"] == 0.0
        assert features["energy"] == 0.0


class TestAssembly:
    def test_irregular_pulse_channel_is_resampled(self):
        rng = np.random.default_rng(8)
        rate, duration = 64.0, 60.0
        t = (np.arange(int(rate * duration)) + rng.uniform(-0.3, 0.3, int(rate * duration))) / rate
        t[0] = 0.0
        beats = np.arange(0.5, duration - 1.0, 0.8)
        bvp = IrregularSignal(t, _stamp(t, beats, pulse_shape, (0.0, 1.0)))
        features = extract_channel(make_trial(channels={Channel.BVP: bvp}), Channel.BVP, extended=False)
        assert features["hr_mean"] == pytest.approx(75.0, abs=1.0)

    def test_extended_indices_never_apply_to_deap(self):
        deap = Scenario(Channel.BVP, Peripherals.ALL, DatasetFlavor.DEAP)
        assert not extended_for(deap, DEFAULT_SETTINGS)
        assert extended_for(Scenario.parse("SCG+ADR"), DEFAULT_SETTINGS)
        assert not extended_for(Scenario.parse("SCG+ADR"), FeatureSettings(extended=False))

    def test_synthetic_trial_layout_and_heart_rate(self, small_dataset):
        trial, truth = small_dataset.trials[0], small_dataset.truth[0]
        for label in ("ECG+RSP", "SCG+ADR"):
            scenario = Scenario.parse(label)
            vector = assemble_features(trial, scenario)
            assert list(vector.names) == scenario_feature_names(scenario)
            cardiac = scenario.cardiac.value.lower()
            assert vector[f"{cardiac}.hr_mean"] == pytest.approx(truth.heart_rate_bpm, abs=5.0)

    def test_missing_channel_raises(self):
        with pytest.raises(MissingChannelError):
            assemble_features(make_trial(), Scenario.parse("ECG+RSP"))

    def test_failed_channel_becomes_missing_values(self, caplog):
        channels = {Channel.ECG: UniformSignal(np.zeros(256 * 30), 256.0), Channel.RSP: sine(0.25, 25.0, 30.0)}
        with caplog.at_level(logging.WARNING):
            vector = assemble_features(make_trial(channels=channels), Scenario.parse("ECG+RSP"))
        ecg = [n for n in vector.names if n.startswith("ecg.")]
        assert all(np.isnan(vector[n]) for n in ecg)
        assert not np.isnan(vector["rsp.rate"])
        assert "ECG features missing" in caplog.text
