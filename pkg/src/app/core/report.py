"""
Result files of an experiment and their reload path.

Every table is tab-delimited UTF-8 with LF line endings. Reals print with
three decimals; ``*_full.tsv`` companions carry full precision. Nothing
written here depends on timing, verbosity or the number of workers.
"""

import json
import logging
from collections import OrderedDict
from dataclasses import replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from app.core.classifiers import BaselineStrategy, describe_model
from app.core.config import ExperimentConfig, parse_config_text
from app.core.errors import ParseError
from app.core.evaluation import AggregateResult, ConfusionMatrix, SubjectResult, aggregate, stars
from app.core.experiment import ExperimentResult, Setup, SetupOutcome, setup_correlations
from app.core.models import Dimension
from app.core.utils import format_real, natural_key
from app.core.validator import ExclusionReport

# Initialize module logger
logger = logging.getLogger(__name__)

CONFIG_FILE = "config.txt"
MANIFEST_FILE = "manifest.json"
SUBJECT_RESULTS_FILE = "subject_results.tsv"
BASELINES_FULL_FILE = "baselines_full.tsv"


class ReportFormat(str, Enum):
    TABLE = "table"
    MATRIX = "matrix"
    MANIFEST = "manifest"
    SELECTION = "selection"
    MODELS = "models"


def _full(value: float) -> str:
    if value is None or np.isnan(value):
        return ""
    return repr(float(value))


def _write(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, sep="\t", index=False, lineterminator="\n", encoding="utf-8")
    return path


def _split_scenario(label: str) -> Tuple[str, str]:
    cardiac, _, peripherals = label.partition("+")
    return cardiac, peripherals


# Tables

def results_table(result: ExperimentResult, full: bool = False) -> pd.DataFrame:
    """
    One row per baseline strategy and per (scenario, classifier) with
    accuracy, F1 and stars for every dimension.
    """
    fmt = _full if full else format_real
    dimensions = result.config.dimensions
    columns = ["classifier", "cardiac", "peripherals", "C"]
    for d in dimensions:
        columns += [f"{d.value}_accuracy", f"{d.value}_f1", f"{d.value}_stars"]
        if full:
            columns += [f"{d.value}_t", f"{d.value}_p", f"{d.value}_subjects"]

    rows = []
    for strategy in BaselineStrategy:
        if not all(d in result.baselines for d in dimensions):
            break
        row = OrderedDict([("classifier", strategy.value), ("cardiac", ""), ("peripherals", ""), ("C", "")])
        for d in dimensions:
            agg = result.baselines[d][strategy]
            row.update([(f"{d.value}_accuracy", fmt(agg.mean_accuracy)),
                        (f"{d.value}_f1", fmt(agg.mean_macro_f1)), (f"{d.value}_stars", "")])
            if full:
                row.update([(f"{d.value}_t", ""), (f"{d.value}_p", ""), (f"{d.value}_subjects", agg.n_subjects)])
        rows.append(row)

    by_setup: Dict[Tuple[str, str], Dict[Dimension, SetupOutcome]] = OrderedDict()
    for outcome in result.setups:
        by_setup.setdefault((outcome.setup.scenario, outcome.setup.classifier), {})[outcome.setup.dimension] = outcome
    for (scenario, classifier), per_dimension in by_setup.items():
        cardiac, peripherals = _split_scenario(scenario)
        c_values = sorted({o.c_param for o in per_dimension.values()})
        c_text = ",".join(fmt(c) if full else f"{c:g}" for c in c_values) if classifier != "NB" else ""
        row = OrderedDict([("classifier", classifier), ("cardiac", cardiac),
                           ("peripherals", peripherals), ("C", c_text)])
        for d in dimensions:
            agg = per_dimension[d].aggregate if d in per_dimension else None
            row.update([
                (f"{d.value}_accuracy", fmt(agg.mean_accuracy) if agg else ""),
                (f"{d.value}_f1", fmt(agg.mean_macro_f1) if agg else ""),
                (f"{d.value}_stars", agg.stars if agg else ""),
            ])
            if full:
                row.update([(f"{d.value}_t", fmt(agg.t_statistic) if agg else ""),
                            (f"{d.value}_p", fmt(agg.p_value) if agg else ""),
                            (f"{d.value}_subjects", agg.n_subjects if agg else 0)])
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def baselines_table(result: ExperimentResult, full: bool = False) -> pd.DataFrame:
    fmt = _full if full else format_real
    columns = ["dimension", "strategy", "accuracy", "f1", "expected_accuracy", "expected_f1"]
    rows = []
    for d in result.config.dimensions:
        for strategy in BaselineStrategy:
            agg = result.baselines.get(d, {}).get(strategy)
            expected = result.expected_baselines.get(d, {}).get(strategy, (float("nan"), float("nan")))
            rows.append([d.value, strategy.value, fmt(agg.mean_accuracy if agg else float("nan")),
                         fmt(agg.mean_macro_f1 if agg else float("nan")), fmt(expected[0]), fmt(expected[1])])
    return pd.DataFrame(rows, columns=columns)


def subject_results_table(result: ExperimentResult) -> pd.DataFrame:
    columns = ["dimension", "scenario", "classifier", "C", "subject_id", "accuracy", "f1",
               "tp", "fp", "fn", "tn", "fold_failures"]
    rows = []
    for outcome in result.setups:
        for r in outcome.results:
            cm = r.confusion
            rows.append([r.dimension.value, r.scenario, r.classifier, _full(outcome.c_param), r.subject_id,
                         _full(r.accuracy), _full(r.macro_f1), cm.tp, cm.fp, cm.fn, cm.tn, r.fold_failures])
        for subject in outcome.failed_subjects:
            rows.append([outcome.setup.dimension.value, outcome.setup.scenario, outcome.setup.classifier,
                         _full(outcome.c_param), subject, "", "", "", "", "", "", ""])
    return pd.DataFrame(rows, columns=columns)


def f1_matrix(result: ExperimentResult, dimension: Dimension) -> pd.DataFrame:
    """Subjects x setups macro-F1 (blank where the subject failed)."""
    chosen = [o for o in result.setups if o.setup.dimension is dimension]
    columns = ["subject_id"] + [o.setup.identifier for o in chosen]
    rows = [[s] + [format_real(o.score_of(s)) for o in chosen] for s in result.subjects]
    return pd.DataFrame(rows, columns=columns)


def correlation_tables(result: ExperimentResult, dimension: Dimension) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """r with significance stars as a square matrix, and all cells in long form."""
    names, cells = result.correlations.get(dimension, ([], []))
    square = pd.DataFrame(
        [[a] + [f"{format_real(c.r)}{stars(c.p)}" if c.defined else "" for c in row]
         for a, row in zip(names, cells)],
        columns=["setup"] + names,
    )
    long = pd.DataFrame(
        [[a, b, _full(c.r), _full(c.p), c.n] for a, row in zip(names, cells) for b, c in zip(names, row)],
        columns=["setup_a", "setup_b", "r", "p", "n"],
    )
    return square, long


def modality_summary(result: ExperimentResult) -> pd.DataFrame:
    """Mean F1 per (dimension, cardiac, peripherals) over the summary classifiers."""
    wanted = result.config.summary_classifiers
    columns = ["dimension", "cardiac", "peripherals", "classifiers", "mean_f1"]
    rows = []
    for d in result.config.dimensions:
        groups: Dict[str, List[float]] = OrderedDict()
        for o in result.setups:
            if o.setup.dimension is d and o.setup.classifier in wanted:
                score = o.aggregate.mean_macro_f1 if o.aggregate else float("nan")
                groups.setdefault(o.setup.scenario, []).append(score)
        for scenario, scores in groups.items():
            cardiac, peripherals = _split_scenario(scenario)
            mean = float(np.mean(scores)) if not np.isnan(scores).any() else float("nan")
            rows.append([d.value, cardiac, peripherals, ",".join(wanted), format_real(mean)])
    return pd.DataFrame(rows, columns=columns)


def sweep_table(result: ExperimentResult) -> pd.DataFrame:
    columns = ["dimension", "scenario", "classifier", "C", "mean_f1", "chosen"]
    rows = [[o.setup.dimension.value, o.setup.scenario, o.setup.classifier, f"{c:g}", format_real(score),
             "yes" if c == o.c_param else ""]
            for o in result.setups for c, score in sorted(o.sweep.items())]
    return pd.DataFrame(rows, columns=columns)


# Selection reports

def _selection_source(result: ExperimentResult, dimension: Dimension, scenario: str) -> Optional[SetupOutcome]:
    """Selection does not depend on the classifier; use the first setup that kept folds."""
    for o in result.setups:
        if o.setup.dimension is dimension and o.setup.scenario == scenario and o.results and o.results[0].folds:
            return o
    return None


def selection_tables(result: ExperimentResult) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Per-fold selected features and the fraction of folds selecting each feature."""
    fold_rows, freq_rows = [], []
    scenarios = list(OrderedDict.fromkeys(o.setup.scenario for o in result.setups))
    for d in result.config.dimensions:
        for scenario in scenarios:
            source = _selection_source(result, d, scenario)
            if source is None:
                continue
            counts: Dict[str, int] = OrderedDict()
            folds = 0
            for r in source.results:
                for f in r.folds:
                    names = [r.feature_names[i] for i in f.selected]
                    fold_rows.append([d.value, scenario, r.subject_id, f.video_id, len(names), ",".join(names)])
                    folds += 1
                    for name in names:
                        counts[name] = counts.get(name, 0) + 1
            for name, count in sorted(counts.items(), key=lambda item: (-item[1], item[0])):
                freq_rows.append([d.value, scenario, name, count, format_real(count / folds)])
    return (
        pd.DataFrame(fold_rows, columns=["dimension", "scenario", "subject_id", "video_id", "selected", "features"]),
        pd.DataFrame(freq_rows, columns=["dimension", "scenario", "feature", "folds", "frequency"]),
    )


def _write_models(result: ExperimentResult, root: Path) -> List[Path]:
    written = []
    for o in result.setups:
        for r in o.results:
            for f in r.folds:
                if f.model is None:
                    continue
                folder = root / o.setup.dimension.value / o.setup.scenario.replace("+", "_") / o.setup.classifier
                folder.mkdir(parents=True, exist_ok=True)
                path = folder / f"{r.subject_id}_{f.video_id}.txt"
                names = [r.feature_names[i] for i in f.selected]
                path.write_text(describe_model(f.model, names), encoding="utf-8", newline="\n")
                written.append(path)
    return written


def emit_report(result: ExperimentResult, out_dir: Union[str, Path],
                formats: Optional[Iterable[ReportFormat]] = None) -> List[Path]:
    """
    Write result files.

    Args:
        result: Completed (or reloaded) experiment
        out_dir: Output directory, created if needed
        formats: Subset of report formats; default is table, matrix and
            manifest plus selection/model reports when the config asks

    Returns:
        Paths written, in writing order
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if formats is None:
        formats = [ReportFormat.TABLE, ReportFormat.MATRIX, ReportFormat.MANIFEST]
        if result.config["report.selection"]:
            formats.append(ReportFormat.SELECTION)
        if result.config["report.models"]:
            formats.append(ReportFormat.MODELS)
    formats = [ReportFormat(f) for f in formats]
    written: List[Path] = []

    if ReportFormat.TABLE in formats:
        written.append(_write(results_table(result), out / "results_table.tsv"))
        written.append(_write(results_table(result, full=True), out / "results_table_full.tsv"))
        written.append(_write(baselines_table(result), out / "baselines.tsv"))
        written.append(_write(baselines_table(result, full=True), out / BASELINES_FULL_FILE))
        written.append(_write(modality_summary(result), out / "modality_summary.tsv"))
        written.append(_write(subject_results_table(result), out / SUBJECT_RESULTS_FILE))
        if any(o.sweep for o in result.setups):
            written.append(_write(sweep_table(result), out / "c_sweep.tsv"))

    if ReportFormat.MATRIX in formats:
        for d in result.config.dimensions:
            written.append(_write(f1_matrix(result, d), out / f"f1_matrix_{d.value}.tsv"))
            square, long = correlation_tables(result, d)
            written.append(_write(square, out / f"correlation_{d.value}.tsv"))
            written.append(_write(long, out / f"correlation_{d.value}_full.tsv"))

    if ReportFormat.MANIFEST in formats:
        path = out / MANIFEST_FILE
        path.write_text(json.dumps(result.manifest(), indent=2) + "\n", encoding="utf-8", newline="\n")
        written.append(path)
        path = out / CONFIG_FILE
        path.write_text(result.config.to_text(include_runtime=False), encoding="utf-8", newline="\n")
        written.append(path)
        exclusions = pd.DataFrame(result.exclusions.to_rows(), columns=["subject_id", "video_id", "reason"])
        written.append(_write(exclusions, out / "exclusions.tsv"))

    if ReportFormat.SELECTION in formats:
        folds, frequency = selection_tables(result)
        written.append(_write(folds, out / "selection_folds.tsv"))
        written.append(_write(frequency, out / "selection_frequency.tsv"))

    if ReportFormat.MODELS in formats:
        written += _write_models(result, out / "models")

    logger.info("Wrote %d report files to %s", len(written), out)
    return written


# Reload

def _read(path: Path) -> pd.DataFrame:
    if not path.exists():
        raise ParseError(path, None, "result file not found")
    return pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False)


def _float(text: str) -> float:
    return float(text) if text != "" else float("nan")


def load_results(results_dir: Union[str, Path]) -> ExperimentResult:
    """
    Rebuild an experiment result from stored files.

    Per-fold detail (selections, models) is not stored in the subject table,
    so reloaded results re-emit tables, matrices, correlations and summaries
    only.

    Raises:
        ParseError: If a required file is missing or malformed
    """
    root = Path(results_dir)
    config_path = root / CONFIG_FILE
    if not config_path.exists():
        raise ParseError(config_path, None, "result directory has no configuration")
    config = ExperimentConfig(parse_config_text(config_path.read_text(encoding="utf-8"), str(config_path)))
    manifest_path = root / MANIFEST_FILE
    status = json.loads(manifest_path.read_text(encoding="utf-8")).get("status", 0) if manifest_path.exists() else 0

    baselines: Dict[Dimension, Dict[BaselineStrategy, AggregateResult]] = {}
    expected: Dict[Dimension, Dict[BaselineStrategy, Tuple[float, float]]] = {}
    for _, row in _read(root / BASELINES_FULL_FILE).iterrows():
        d, strategy = Dimension(row["dimension"]), BaselineStrategy(row["strategy"])
        expected.setdefault(d, {})[strategy] = (_float(row["expected_accuracy"]), _float(row["expected_f1"]))
        if row["f1"] != "":
            baselines.setdefault(d, {})[strategy] = AggregateResult(
                (), (), (), _float(row["accuracy"]), _float(row["f1"]))

    setups: Dict[Setup, SetupOutcome] = OrderedDict()
    subjects = set()
    frame = _read(root / SUBJECT_RESULTS_FILE)
    for number, row in enumerate(frame.to_dict("records"), start=2):
        try:
            setup = Setup(Dimension(row["dimension"]), row["scenario"], row["classifier"])
            outcome = setups.setdefault(setup, SetupOutcome(setup, float(row["C"])))
            subjects.add(row["subject_id"])
            if row["f1"] == "":
                outcome.failed_subjects.append(row["subject_id"])
                continue
            cm = ConfusionMatrix(int(row["tp"]), int(row["fp"]), int(row["fn"]), int(row["tn"]))
            outcome.results.append(SubjectResult(
                row["subject_id"], setup.dimension, setup.scenario, setup.classifier,
                float(row["accuracy"]), float(row["f1"]), cm, int(row["fold_failures"]), float(row["C"])))
        except (KeyError, ValueError) as e:
            raise ParseError(root / SUBJECT_RESULTS_FILE, number, f"malformed row: {e}")

    ordered = sorted(subjects, key=natural_key)
    # baselines cover every kept subject, including those whose setups failed
    baselines = {d: {s: replace(agg, subject_ids=tuple(ordered)) for s, agg in per.items()}
                 for d, per in baselines.items()}

    correlations = {}
    for d in config.dimensions:
        reference = max((a.mean_macro_f1 for a in baselines.get(d, {}).values()), default=None)
        for outcome in setups.values():
            if outcome.setup.dimension is d and len(outcome.results) >= 2 and reference is not None:
                outcome.aggregate = aggregate(outcome.results, reference, config.alternative,
                                              outcome.failed_subjects)
        correlations[d] = setup_correlations(list(setups.values()), d)

    return ExperimentResult(config, ordered, ExclusionReport(kept_subjects=ordered), list(setups.values()),
                            baselines, expected, correlations, status)
