import json

import pandas as pd
import pandas.testing as pdt
import pytest

from app.core.config import ExperimentConfig
from app.core.errors import ParseError
from app.core.experiment import run_experiment
from app.core.report import (
    ReportFormat,
    emit_report,
    f1_matrix,
    load_results,
    modality_summary,
    results_table,
    selection_tables,
)


@pytest.fixture(scope="module")
def result(small_dataset):
    config = ExperimentConfig({"experiment.scenarios": "ECG+RSP, SCG+ADR", "classifiers.kinds": "NB, LR",
                               "baselines.repetitions": 20, "report.summary_classifiers": "NB, LR"})
    return run_experiment(config, small_dataset.trials)


def read_tsv(path):
    return pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False)


def test_default_files(result, tmp_path):
    written = emit_report(result, tmp_path)
    names = {p.name for p in written}
    assert {"results_table.tsv", "results_table_full.tsv", "baselines.tsv", "baselines_full.tsv",
            "modality_summary.tsv", "subject_results.tsv", "f1_matrix_valence.tsv", "f1_matrix_arousal.tsv",
            "correlation_valence.tsv", "correlation_arousal_full.tsv", "manifest.json", "config.txt",
            "exclusions.tsv", "selection_folds.tsv", "selection_frequency.tsv"} <= names
    assert "c_sweep.tsv" not in names
    assert not (tmp_path / "models").exists()
    assert json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))["subjects"] == 3
    assert "experiment.output" not in (tmp_path / "config.txt").read_text(encoding="utf-8")


def test_results_table_layout(result):
    table = results_table(result)
    assert list(table["classifier"]) == ["Random", "Majority", "Ratio", "NB", "LR", "NB", "LR"]
    assert list(table["cardiac"][3:]) == ["ECG", "ECG", "SCG", "SCG"]
    assert list(table.columns[:4]) == ["classifier", "cardiac", "peripherals", "C"]
    assert "valence_f1" in table.columns and "arousal_stars" in table.columns
    nb = table[table["classifier"] == "NB"]
    assert set(nb["C"]) == {""}
    assert all(len(cell.split(".")[1]) == 3 for cell in table["valence_accuracy"] if cell)


def test_f1_matrix_and_summary(result):
    matrix = f1_matrix(result, result.config.dimensions[0])
    assert list(matrix["subject_id"]) == ["S01", "S02", "S03"]
    assert matrix.shape == (3, 5)
    summary = modality_summary(result)
    assert len(summary) == 4
    assert set(summary["classifiers"]) == {"NB,LR"}


def test_selection_tables(result):
    folds, frequency = selection_tables(result)
    # one row per fold: 3 subjects x 6 videos for each (dimension, scenario)
    assert len(folds) == 3 * 6 * 2 * 2
    assert set(folds.groupby(["dimension", "scenario", "subject_id"]).size()) == {6}
    assert frequency["frequency"].map(float).between(0.0, 1.0).all()


def test_reloaded_results_rebuild_the_tables(result, tmp_path):
    emit_report(result, tmp_path)
    reloaded = load_results(tmp_path)
    assert reloaded.subjects == result.subjects
    assert reloaded.config.config_hash == result.config.config_hash
    pdt.assert_frame_equal(results_table(reloaded), results_table(result))
    pdt.assert_frame_equal(f1_matrix(reloaded, result.config.dimensions[1]),
                           f1_matrix(result, result.config.dimensions[1]))


def test_report_subset(result, tmp_path):
    written = emit_report(result, tmp_path, [ReportFormat.MATRIX])
    assert {p.name for p in written} == {"f1_matrix_valence.tsv", "correlation_valence.tsv",
                                         "correlation_valence_full.tsv", "f1_matrix_arousal.tsv",
                                         "correlation_arousal.tsv", "correlation_arousal_full.tsv"}
    square = read_tsv(tmp_path / "correlation_valence.tsv")
    assert list(square.columns[1:]) == list(square["setup"])


def test_model_dumps(small_dataset, tmp_path):
    config = ExperimentConfig({"experiment.scenarios": "ECG+RSP", "classifiers.kinds": "SVM",
                               "experiment.dimensions": "arousal", "baselines.repetitions": 5,
                               "report.models": True})
    written = emit_report(run_experiment(config, small_dataset.trials), tmp_path, [ReportFormat.MODELS])
    assert len(written) == 3 * 6
    dump = tmp_path / "models" / "arousal" / "ECG_RSP" / "SVM" / "S01_v01.txt"
    assert dump in written
    lines = dump.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "kind\tSVM" and lines[-1].startswith("bias\t")


def test_load_needs_a_configuration(tmp_path):
    with pytest.raises(ParseError):
        load_results(tmp_path)
