import math

import numpy as np
import pytest

from app.core.errors import InsufficientDataError
from app.core.hrv import (
    approximate_entropy,
    frequency_indices,
    pnn,
    ratio,
    tachogram,
    time_domain_indices,
)

ALTERNATING = np.array([0.8, 1.2] * 10)


def direct_indices(x):
    """Textbook definitions over the raw interval list."""
    diffs = np.diff(x)
    mean, median = np.mean(x), np.median(x)
    sd = np.sqrt(np.sum((x - mean) ** 2) / (x.size - 1))
    rms = np.sqrt(np.sum(diffs ** 2) / diffs.size)
    mad = 1.4826 * np.median(np.abs(x - median))
    ordered = np.sort(x)
    return {
        "MeanNN": mean,
        "SDNN": sd,
        "RMSSD": rms,
        "SDSD": np.sqrt(np.sum((diffs - diffs.mean()) ** 2) / (diffs.size - 1)),
        "SD1": rms / math.sqrt(2.0),
        "CVNN": sd / mean,
        "CVSD": rms / mean,
        "SDRMSSD": sd / rms,
        "MedianNN": median,
        "MadNN": mad,
        "MCVNN": mad / median,
        "IQRNN": np.percentile(x, 75) - np.percentile(x, 25),
        "Prc20NN": np.percentile(x, 20),
        "Prc80NN": np.percentile(x, 80),
        "MinNN": ordered[0],
        "MaxNN": ordered[-1],
        "pNN20": 100.0 * sum(abs(d) > 0.020 for d in diffs) / diffs.size,
        "pNN50": 100.0 * sum(abs(d) > 0.050 for d in diffs) / diffs.size,
        "HTI": x.size / np.bincount(np.floor(x * 128).astype(int)).max(),
    }


def random_interval_lists(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield rng.uniform(0.4, 1.6, int(rng.integers(5, 80)))


def assert_matches_direct_definitions(x):
    indices = time_domain_indices(x)
    for name, expected in direct_indices(x).items():
        assert indices[name] == pytest.approx(expected, rel=1e-9, abs=1e-12), name


def test_alternating_intervals():
    indices = time_domain_indices(ALTERNATING)
    assert indices["RMSSD"] == pytest.approx(0.4)
    assert indices["MeanNN"] == pytest.approx(1.0)
    assert indices["pNN50"] == pytest.approx(100.0)
    assert indices["SD1"] == pytest.approx(0.4 / math.sqrt(2))
    assert indices["MinNN"] == pytest.approx(0.8) and indices["MaxNN"] == pytest.approx(1.2)


def test_pnn_counts_strictly_larger_differences():
    intervals = [1.0, 1.0078125, 1.1, 1.1, 1.07]
    assert pnn(intervals, 0.02) == pytest.approx(50.0)
    assert pnn(intervals, 0.05) == pytest.approx(25.0)


def test_mad_is_scaled():
    indices = time_domain_indices([0.8, 0.9, 1.0, 1.1, 3.0])
    assert indices["MadNN"] == pytest.approx(0.14826)
    assert indices["MCVNN"] == pytest.approx(0.14826)


def test_ratio_with_zero_denominator():
    assert math.isnan(ratio(1.0, 0.0))
    assert math.isnan(ratio(float("nan"), 2.0))
    assert ratio(3.0, 2.0) == 1.5


def test_triangular_index_of_a_single_bin():
    assert time_domain_indices([0.8001, 0.8002, 0.8003])["HTI"] == pytest.approx(1.0)


def test_tinn_grows_with_spread():
    rng = np.random.default_rng(3)
    narrow = time_domain_indices(rng.normal(0.8, 0.01, 300))["TINN"]
    wide = time_domain_indices(rng.normal(0.8, 0.05, 300))["TINN"]
    assert wide > narrow > 0


def test_approximate_entropy_regular_versus_random():
    regular = np.tile([0.8, 1.0], 30)
    noisy = np.random.default_rng(5).uniform(0.6, 1.2, 60)
    assert approximate_entropy(regular) < approximate_entropy(noisy)
    assert approximate_entropy(regular) == pytest.approx(0.0, abs=0.05)
    assert math.isnan(approximate_entropy([1.0, 2.0]))


def test_time_domain_key_order():
    indices = time_domain_indices(ALTERNATING, pnn_thresholds=(0.02, 0.05, 0.1))
    assert list(indices)[:5] == ["MeanNN", "SDNN", "RMSSD", "SDSD", "SD1"]
    assert list(indices)[-5:] == ["pNN20", "pNN50", "pNN100", "HTI", "TINN"]


def test_time_domain_needs_two_intervals():
    with pytest.raises(InsufficientDataError):
        time_domain_indices([1.0])


def test_indices_match_direct_definitions():
    for x in random_interval_lists(20, seed=0):
        assert_matches_direct_definitions(x)


@pytest.mark.slow
def test_indices_match_direct_definitions_on_many_lists():
    for x in random_interval_lists(1000, seed=1):
        assert_matches_direct_definitions(x)


def test_tachogram_grid():
    series = tachogram(np.array([1.0, 1.0, 1.0]), np.array([0.0, 1.0, 2.0]))
    assert series.rate == 4.0
    assert len(series) == 9


def test_respiratory_sinus_arrhythmia_sits_in_high_frequency():
    onsets = np.cumsum(np.full(300, 0.8))
    intervals = 0.8 + 0.05 * np.sin(2 * np.pi * 0.25 * onsets)
    indices = frequency_indices(intervals, onsets, (0.04, 0.15), (0.15, 0.5))
    assert indices["HF"] > 10 * indices["LF"]
    assert indices["HFn"] == pytest.approx(indices["HF"] / (indices["LF"] + indices["HF"]))
    assert indices["LnHF"] == pytest.approx(math.log(indices["HF"]))


def test_constant_intervals_have_no_spectral_power():
    onsets = np.arange(100) * 1.0
    indices = frequency_indices(np.ones(100), onsets, (0.04, 0.15), (0.15, 0.5))
    assert indices["HF"] == 0.0
    assert math.isnan(indices["LnHF"]) and math.isnan(indices["LFHF"])
