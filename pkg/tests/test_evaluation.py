import math

import numpy as np
import pytest

from app.core.classifiers import BaselineStrategy, ClassifierConfig, ClassifierKind
from app.core.errors import (
    EmptyEvaluationError,
    InsufficientDataError,
    InsufficientSubjectsError,
    InsufficientTrialsError,
    SubjectEvaluationError,
)
from app.core.evaluation import (
    Alternative,
    ConfusionMatrix,
    SelectionScope,
    SubjectMatrix,
    accuracy,
    aggregate_scores,
    best_baseline_reference,
    confusion,
    evaluate_subject,
    expected_baseline_scores,
    lovo_folds,
    macro_f1,
    one_sample_t_test,
    run_baselines,
    run_subject,
    simulate_baseline,
    stars,
)
from app.core.models import Dimension, Scenario
from app.core.selection import SelectionRule
from app.core.utils import derive_rng


class TestMetrics:
    def test_balanced_confusion(self):
        cm = ConfusionMatrix(tp=5, fp=5, fn=5, tn=5)
        assert accuracy(cm) == 0.5
        assert macro_f1(cm) == 0.5

    def test_confusion_counts(self):
        cm = confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == (2, 1, 1, 1)

    def test_class_absent_from_both_sides_is_skipped(self):
        cm = confusion([1, 1, 1], [1, 1, 1])
        assert macro_f1(cm) == 1.0

    def test_present_but_never_predicted_scores_zero(self):
        cm = confusion([1, 1, 1, 1], [1, 1, 1, 0])
        assert macro_f1(cm) == pytest.approx((6 / 7 + 0.0) / 2)

    def test_swapping_labels_keeps_macro_f1(self):
        cm = ConfusionMatrix(tp=7, fp=2, fn=3, tn=4)
        assert macro_f1(cm.swapped()) == pytest.approx(macro_f1(cm))

    def test_empty(self):
        with pytest.raises(EmptyEvaluationError):
            confusion([], [])
        with pytest.raises(EmptyEvaluationError):
            accuracy(ConfusionMatrix())


class TestFolds:
    def test_one_fold_per_trial_in_natural_order(self):
        folds = lovo_folds(["v10", "v2", "v1"])
        assert [f.video_id for f in folds] == ["v1", "v2", "v10"]
        assert sorted(f.test_index for f in folds) == [0, 1, 2]
        for fold in folds:
            assert fold.test_index not in fold.train_indices
            assert len(fold.train_indices) == 2

    def test_needs_two_trials(self):
        with pytest.raises(InsufficientTrialsError):
            lovo_folds(["v1"])

    def test_unique_videos(self):
        with pytest.raises(ValueError):
            lovo_folds(["v1", "v1"])


def informative_matrix(n=12, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.array([0, 1] * (n // 2))
    features = rng.normal(size=(n, 4))
    features[:, 1] += 5.0 * labels
    videos = tuple(f"v{i + 1}" for i in range(n))
    return SubjectMatrix("S01", videos, ("a", "b", "c", "d"), features, labels)


class TestSubjectEvaluation:
    @pytest.mark.parametrize("kind", list(ClassifierKind))
    def test_informative_feature_is_learned(self, kind):
        result = evaluate_subject(informative_matrix(), "ECG+RSP", ClassifierConfig(kind),
                                  SelectionRule(min_count=2), dimension=Dimension.AROUSAL)
        assert result.accuracy == 1.0 and result.macro_f1 == 1.0
        assert result.confusion.total == 12
        assert result.fold_failures == 0
        assert all(1 in fold.selected for fold in result.folds)
        assert result.setup == ("arousal", "ECG+RSP", kind.value)

    def test_subject_scope_selects_once(self):
        result = evaluate_subject(informative_matrix(), "ECG+RSP", ClassifierConfig(ClassifierKind.NB),
                                  SelectionRule(min_count=1), SelectionScope.SUBJECT)
        assert len({fold.selected for fold in result.folds}) == 1

    def test_single_class_fold_falls_back_to_majority(self):
        matrix = informative_matrix(n=6).with_labels([1, 0, 0, 0, 0, 0])
        result = evaluate_subject(matrix, "ECG+RSP", ClassifierConfig(ClassifierKind.LR), SelectionRule(min_count=1))
        assert result.fold_failures == 1
        failed = [f for f in result.folds if f.failed][0]
        assert failed.video_id == "v1"
        assert int(failed.prediction) == 0

    def test_every_fold_failing_is_an_error(self):
        matrix = informative_matrix(n=4).with_labels([1, 1, 1, 1])
        with pytest.raises(SubjectEvaluationError):
            evaluate_subject(matrix, "ECG+RSP", ClassifierConfig(ClassifierKind.NB))

    def test_models_are_kept_on_request(self):
        result = evaluate_subject(informative_matrix(), "ECG+RSP", ClassifierConfig(ClassifierKind.SVM),
                                  SelectionRule(min_count=2), keep_models=True)
        assert all(fold.model is not None and len(fold.parameter_hash) == 64 for fold in result.folds)

    @pytest.mark.parametrize("kind", list(ClassifierKind))
    def test_test_trial_never_reaches_its_fold_model(self, kind):
        matrix = informative_matrix()
        features = matrix.features.copy()
        features[0] = [100.0, -100.0, np.nan, 50.0]
        perturbed = SubjectMatrix("S01", matrix.video_ids, matrix.feature_names, features, matrix.labels)
        config, rule = ClassifierConfig(kind), SelectionRule(min_count=2)
        before = evaluate_subject(matrix, "ECG+RSP", config, rule).folds
        after = evaluate_subject(perturbed, "ECG+RSP", config, rule).folds
        assert before[0].video_id == after[0].video_id == "v1"
        assert before[0].parameter_hash == after[0].parameter_hash
        assert before[1].parameter_hash != after[1].parameter_hash

    @pytest.mark.slow
    def test_synthetic_subject_end_to_end(self, small_dataset):
        trials = [t for t in small_dataset.trials if t.subject_id == "S01"]
        result = run_subject(trials, Dimension.AROUSAL, Scenario.parse("ECG+RSP"),
                             ClassifierConfig(ClassifierKind.LR), SelectionRule(min_count=3))
        assert result.confusion.total == len(trials)


class TestStatistics:
    def test_mean_on_the_reference(self):
        test = one_sample_t_test([0.25, 0.75, 0.5], 0.5)
        assert test.statistic == 0.0
        assert test.p_value == pytest.approx(0.5)

    def test_t_statistic_and_one_sided_p(self):
        # mean 0.6, sd 0.05, n 5 against 0.5: t = 0.1 / (0.05 / sqrt(5))
        base = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
        scores = 0.6 + 0.05 * base / np.std(base, ddof=1)
        test = one_sample_t_test(scores, 0.5)
        assert test.statistic == pytest.approx(4.472, abs=1e-3)
        assert test.p_value == pytest.approx(0.0055, abs=2e-4)
        two_sided = one_sample_t_test(scores, 0.5, Alternative.TWO_SIDED)
        assert two_sided.p_value == pytest.approx(2 * test.p_value)

    def test_below_reference_is_not_significant(self):
        test = one_sample_t_test([0.3, 0.35, 0.4], 0.5)
        assert test.statistic < 0 and test.p_value > 0.95

    def test_zero_variance_above_reference(self, caplog):
        test = one_sample_t_test([0.7, 0.7, 0.7], 0.5)
        assert math.isinf(test.statistic) and test.p_value == 0.0
        assert "without variance" in caplog.text

    def test_needs_two_scores(self):
        with pytest.raises(InsufficientDataError):
            one_sample_t_test([0.5], 0.5)

    @pytest.mark.parametrize("p,mark", [(0.0009, "***"), (0.005, "**"), (0.03, "*"), (0.05, ""), (float("nan"), "")])
    def test_stars(self, p, mark):
        assert stars(p) == mark

    def test_aggregate_needs_two_subjects(self):
        with pytest.raises(InsufficientSubjectsError):
            aggregate_scores(["S01"], [0.5], [0.5], 0.5)

    def test_aggregate_means(self):
        agg = aggregate_scores(["S01", "S02", "S03"], [0.5, 0.7, 0.9], [0.4, 0.6, 0.8], None)
        assert agg.mean_accuracy == pytest.approx(0.7)
        assert agg.mean_macro_f1 == pytest.approx(0.6)
        assert math.isnan(agg.p_value) and agg.stars == ""
        assert agg.n_subjects == 3


class TestBaselines:
    def test_majority_expectation(self):
        labels = [1] * 586 + [0] * 414
        acc, f1 = expected_baseline_scores(labels, BaselineStrategy.MAJORITY)
        assert acc == pytest.approx(0.586)
        assert f1 == pytest.approx(0.586 / 1.586, abs=1e-4)

    def test_ratio_and_random_expectations(self):
        labels = [1] * 3 + [0] * 7
        acc, f1 = expected_baseline_scores(labels, BaselineStrategy.RATIO)
        assert acc == pytest.approx(0.3 ** 2 + 0.7 ** 2)
        assert f1 == pytest.approx(0.5)
        acc, _ = expected_baseline_scores(labels, BaselineStrategy.RANDOM)
        assert acc == pytest.approx(0.5)

    def test_simulation_matches_expectation(self):
        labels = [1] * 13 + [0] * 25
        acc, _ = simulate_baseline(labels, BaselineStrategy.RATIO, np.random.default_rng(0), repetitions=4000)
        p = 13 / 38
        assert acc == pytest.approx(p ** 2 + (1 - p) ** 2, abs=0.005)

    def test_baselines_are_reproducible(self):
        labels = {"S01": [0, 1, 1, 0, 1], "S02": [1, 1, 0, 0, 0, 0]}
        first = run_baselines(labels, Dimension.VALENCE, seed=5, repetitions=50)
        second = run_baselines(labels, Dimension.VALENCE, seed=5, repetitions=50)
        for strategy in BaselineStrategy:
            assert first[strategy].scores == second[strategy].scores
        assert first[BaselineStrategy.MAJORITY].subject_ids == ("S01", "S02")
        assert best_baseline_reference(first) == max(a.mean_macro_f1 for a in first.values())

    def test_streams_depend_on_keys_only(self):
        a = derive_rng(1, "baseline", "S01", "valence", "Random").random(3)
        b = derive_rng(1, "baseline", "S01", "valence", "Random").random(3)
        c = derive_rng(1, "baseline", "S02", "valence", "Random").random(3)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
