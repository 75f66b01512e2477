"""
Experiment configuration.

A configuration file is flat plain text of ``section.key = value`` lines with
``#`` comments. Every key is registered here with its type and default, so
``ExperimentConfig.to_text()`` can print a complete, self-documenting file and
the configuration hash covers every switch that can change a result.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

from app.core.classifiers import ClassifierConfig, ClassifierKind
from app.core.constants import (
    BASELINE_REPETITIONS,
    C_GRID,
    DEFAULT_C,
    DEFAULT_SEED,
    DETREND_WINDOW,
    FISHER_DDOF,
    FISHER_THRESHOLD,
    IBI_SCREENING,
    IBI_WINDOW,
    LR_TOLERANCE,
    MAX_ITERATIONS,
    MIN_CLASS_FRACTION,
    MIN_FEATURE_COUNT,
    PNN_THRESHOLDS,
    SCSR_CUTOFF,
    SCVSR_CUTOFF,
    SELECTION_SCOPE,
    SLOW_SEGMENT_SECONDS,
    SUMMARY_CLASSIFIERS,
    SVM_TOLERANCE,
    T_TEST_ALTERNATIVE,
    TIE_IS_HIGH,
    WELCH_SEGMENT,
)
from app.core.errors import ConfigError
from app.core.evaluation import Alternative, SelectionScope
from app.core.features import FeatureSettings
from app.core.models import DatasetFlavor, Dimension, Scenario, default_scenarios
from app.core.selection import SelectionRule
from app.core.synthetic import LabelEffect, SyntheticSpec
from app.core.utils import sha256_text

# Initialize module logger
logger = logging.getLogger(__name__)

AUTO = "auto"

# keys that change how a run executes but never what it computes
RUNTIME_KEYS = frozenset({"experiment.output", "experiment.jobs"})


# Value codecs

def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true or false, got '{text}'")


def _parse_int(text: str) -> int:
    return int(text.strip())


def _parse_float(text: str) -> float:
    return float(text.strip())


def _parse_str(text: str) -> str:
    return text.strip()


def _parse_list(text: str) -> Tuple[str, ...]:
    return tuple(item.strip() for item in text.split(",") if item.strip())


def _parse_floats(text: str) -> Tuple[float, ...]:
    return tuple(float(item) for item in _parse_list(text))


def _parse_pair(text: str) -> Tuple[float, float]:
    values = _parse_floats(text)
    if len(values) != 2 or not values[0] < values[1]:
        raise ValueError(f"expected 'low, high' with low < high, got '{text}'")
    return values


def _choice(*allowed: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        value = text.strip()
        matches = [a for a in allowed if a.lower() == value.lower()]
        if not matches:
            raise ValueError(f"expected one of {', '.join(allowed)}, got '{text}'")
        return matches[0]
    return parse


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    if isinstance(value, (tuple, list)):
        return ", ".join(_format(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class ConfigKey:
    name: str
    parse: Callable[[str], Any]
    default: Any
    help: str

    @property
    def section(self) -> str:
        return self.name.split(".", 1)[0]


def _positive(parse: Callable[[str], Any], minimum: float = 0, strict: bool = True) -> Callable[[str], Any]:
    def check(text: str) -> Any:
        value = parse(text)
        values = value if isinstance(value, tuple) else (value,)
        for v in values:
            if (strict and not v > minimum) or (not strict and v < minimum):
                raise ValueError(f"must be {'>' if strict else '>='} {minimum:g}, got {v}")
        return value
    return check


_KEYS = [
    ConfigKey("dataset.path", _parse_str, "", "dataset root in the trial-file schema"),
    ConfigKey("dataset.flavor", _choice(*(f.value for f in DatasetFlavor)), DatasetFlavor.EMOWEAR.value,
              "emowear, deap or synthetic"),
    ConfigKey("dataset.exclusions", _parse_str, "", "extra exclusions sidecar (empty: dataset's own only)"),
    ConfigKey("experiment.seed", _parse_int, DEFAULT_SEED, "seed of every random stream"),
    ConfigKey("experiment.output", _parse_str, "results", "output directory"),
    ConfigKey("experiment.jobs", _positive(_parse_int), 1, "parallel worker processes"),
    ConfigKey("experiment.scenarios", _parse_list, (AUTO,), "scenario labels such as SCG+ADR, or auto"),
    ConfigKey("experiment.dimensions", _parse_list, tuple(d.value for d in Dimension), "valence, arousal"),
    ConfigKey("labels.tie_high", _parse_bool, TIE_IS_HIGH, "rating exactly 5 counts as High"),
    ConfigKey("labels.min_class_fraction", _positive(_parse_float), MIN_CLASS_FRACTION,
              "minimum High and Low share per subject and dimension"),
    ConfigKey("dsp.welch_segment", _positive(_parse_int), WELCH_SEGMENT, "tachogram Welch segment (samples)"),
    ConfigKey("dsp.slow_segment_seconds", _positive(_parse_float), SLOW_SEGMENT_SECONDS,
              "Welch segment of respiration, EDA and SKT spectra (s)"),
    ConfigKey("dsp.detrend_window", _positive(_parse_int), DETREND_WINDOW, "BVP and EDA detrend window (samples)"),
    ConfigKey("ibi.screening", _parse_bool, IBI_SCREENING, "drop implausible beat intervals"),
    ConfigKey("ibi.window", _parse_pair, IBI_WINDOW, "plausible beat interval range (s)"),
    ConfigKey("ibi.pnn_thresholds", _positive(_parse_floats), PNN_THRESHOLDS, "pNN thresholds (s)"),
    ConfigKey("features.extended", _parse_bool, True, "extended cardiac and respiratory indices (never for deap)"),
    ConfigKey("features.absolute_derivative", _parse_bool, False, "IBI derivative features on |diff|"),
    ConfigKey("features.scsr_cutoff", _positive(_parse_float), SCSR_CUTOFF, "slow skin response low-pass (Hz)"),
    ConfigKey("features.scvsr_cutoff", _positive(_parse_float), SCVSR_CUTOFF, "very slow skin response low-pass (Hz)"),
    ConfigKey("selection.threshold", _positive(_parse_float, strict=False), FISHER_THRESHOLD,
              "Fisher score threshold"),
    ConfigKey("selection.min_count", _positive(_parse_int, strict=False), MIN_FEATURE_COUNT,
              "minimum number of selected features"),
    ConfigKey("selection.ddof", _choice("0", "1"), str(FISHER_DDOF), "0 population, 1 sample variances"),
    ConfigKey("selection.scope", _choice(*(s.value for s in SelectionScope)), SELECTION_SCOPE,
              "fit selection per fold or per subject"),
    ConfigKey("classifiers.kinds", _parse_list, tuple(k.value for k in ClassifierKind), "NB, SVM, LR"),
    ConfigKey("classifiers.c", _positive(_parse_float), DEFAULT_C, "regularization parameter C"),
    ConfigKey("classifiers.sweep", _parse_bool, False, "evaluate every C of the grid, report the best"),
    ConfigKey("classifiers.c_grid", _positive(_parse_floats), C_GRID, "C values of the sweep"),
    ConfigKey("classifiers.balanced", _parse_bool, True, "balanced class weights for SVM and LR"),
    ConfigKey("classifiers.max_iterations", _positive(_parse_int), MAX_ITERATIONS, "iteration cap"),
    ConfigKey("classifiers.lr_tolerance", _positive(_parse_float), LR_TOLERANCE, "LR gradient tolerance"),
    ConfigKey("classifiers.svm_tolerance", _positive(_parse_float), SVM_TOLERANCE, "SVM gradient tolerance"),
    ConfigKey("stats.alternative", _choice(*(a.value for a in Alternative)), T_TEST_ALTERNATIVE,
              "t-test alternative: greater or two-sided"),
    ConfigKey("baselines.repetitions", _positive(_parse_int), BASELINE_REPETITIONS, "simulated voting rounds"),
    ConfigKey("synthetic.flavor", _choice(DatasetFlavor.SYNTHETIC.value, DatasetFlavor.DEAP.value),
              DatasetFlavor.SYNTHETIC.value, "synthetic (EmoWear-like channels) or deap"),
    ConfigKey("synthetic.subjects", _positive(_parse_int), 4, "number of subjects"),
    ConfigKey("synthetic.trials", _positive(_parse_int), 38, "trials per subject"),
    ConfigKey("synthetic.duration", _positive(_parse_float), 60.0, "trial length (s)"),
    ConfigKey("synthetic.heart_rate_range", _parse_pair, (60.0, 85.0), "subject baseline heart rate (bpm)"),
    ConfigKey("synthetic.breath_rate_range", _parse_pair, (0.2, 0.27), "subject baseline breathing rate (Hz)"),
    ConfigKey("synthetic.high_fraction", _positive(_parse_float), 0.5, "share of High trials per dimension"),
    ConfigKey("synthetic.noise", _positive(_parse_float, strict=False), 0.02, "relative noise level"),
    ConfigKey("synthetic.faulty_trials", _positive(_parse_int, strict=False), 0, "faulty-flagged trials per subject"),
    ConfigKey("synthetic.arousal_heart_rate", _parse_float, 10.0, "High-arousal heart rate shift (bpm)"),
    ConfigKey("synthetic.arousal_breathing", _parse_float, 3.0, "High-arousal breathing shift (breaths/min)"),
    ConfigKey("synthetic.arousal_responses", _parse_float, 2.0, "High-arousal extra skin responses per minute"),
    ConfigKey("synthetic.valence_heart_rate", _parse_float, 0.0, "High-valence heart rate shift (bpm)"),
    ConfigKey("synthetic.valence_breathing", _parse_float, 0.0, "High-valence breathing shift (breaths/min)"),
    ConfigKey("synthetic.valence_responses", _parse_float, 0.0, "High-valence extra skin responses per minute"),
    ConfigKey("report.selection", _parse_bool, True, "write per-fold selection and frequency reports"),
    ConfigKey("report.models", _parse_bool, False, "write per-fold model parameter dumps"),
    ConfigKey("report.summary_classifiers", _parse_list, SUMMARY_CLASSIFIERS,
              "classifiers averaged in the modality summary"),
]

REGISTRY: "OrderedDict[str, ConfigKey]" = OrderedDict((k.name, k) for k in _KEYS)


def parse_value(key: str, value: Any) -> Any:
    """
    Parse (or re-validate) a value for a registered key.

    Raises:
        ConfigError: If the key is unknown or the value does not parse
    """
    if key not in REGISTRY:
        raise ConfigError(f"unknown configuration key '{key}'")
    text = value if isinstance(value, str) else _format(value)
    try:
        return REGISTRY[key].parse(text)
    except ValueError as e:
        raise ConfigError(f"invalid value for {key}: {e}")


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    """
    Parse ``key = value`` lines.

    Args:
        text: File contents
        source: Name used in error messages

    Returns:
        Dictionary of the keys that were set

    Raises:
        ConfigError: On malformed lines, unknown keys, duplicates or bad values
    """
    values: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: invalid line '{raw.strip()}', expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{source}:{number}: '{key}' set twice")
        try:
            values[key] = parse_value(key, value)
        except ConfigError as e:
            raise ConfigError(f"{source}:{number}: {e}")
    return values


class ExperimentConfig:
    """Immutable set of effective configuration values with typed views."""

    def __init__(self, values: Optional[Mapping[str, Any]] = None):
        effective = OrderedDict((name, key.default) for name, key in REGISTRY.items())
        for name, value in (values or {}).items():
            effective[name] = parse_value(name, value)
        self._values = MappingProxyType(effective)
        self._check()

    def _check(self) -> None:
        # build every typed view once so inconsistent combinations fail early
        self.scenarios
        self.classifiers
        self.dimensions
        self.selection_rule
        self.synthetic_spec
        if self["labels.min_class_fraction"] > 0.5:
            raise ConfigError("labels.min_class_fraction must be <= 0.5")

    def __getitem__(self, key: str) -> Any:
        return self._values[key]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ExperimentConfig) and self.to_text() == other.to_text()

    def __hash__(self) -> int:
        return hash(self.to_text())

    def as_dict(self) -> Dict[str, Any]:
        return dict(self._values)

    def with_values(self, overrides: Mapping[str, Any]) -> "ExperimentConfig":
        """Copy with some keys replaced (values may be typed or text)."""
        merged = dict(self._values)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig(merged)

    def to_text(self, include_runtime: bool = True) -> str:
        """Canonical file form listing every key with its effective value."""
        lines, section = [], None
        for name, key in REGISTRY.items():
            if not include_runtime and name in RUNTIME_KEYS:
                continue
            if key.section != section:
                if section is not None:
                    lines.append("")
                lines.append(f"# {key.section}")
                section = key.section
            lines.append(f"{name} = {_format(self._values[name])}")
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical text without the execution-only keys."""
        return sha256_text(self.to_text(include_runtime=False))

    # Typed views

    @property
    def flavor(self) -> DatasetFlavor:
        return DatasetFlavor(self["dataset.flavor"])

    @property
    def dataset_path(self) -> Optional[Path]:
        return Path(self["dataset.path"]) if self["dataset.path"] else None

    @property
    def exclusions_path(self) -> Optional[Path]:
        return Path(self["dataset.exclusions"]) if self["dataset.exclusions"] else None

    @property
    def output(self) -> Path:
        return Path(self["experiment.output"])

    @property
    def seed(self) -> int:
        return self["experiment.seed"]

    @property
    def jobs(self) -> int:
        return self["experiment.jobs"]

    @property
    def tie_high(self) -> bool:
        return self["labels.tie_high"]

    @property
    def scenarios(self) -> List[Scenario]:
        labels = self["experiment.scenarios"]
        if not labels or [label.lower() for label in labels] == [AUTO]:
            return default_scenarios(self.flavor)
        scenarios = []
        for label in labels:
            try:
                scenario = Scenario.parse(label, self.flavor)
            except ValueError as e:
                raise ConfigError(f"experiment.scenarios: {e}")
            if scenario not in scenarios:
                scenarios.append(scenario)
        return scenarios

    @property
    def dimensions(self) -> List[Dimension]:
        try:
            dimensions = [Dimension(d.lower()) for d in self["experiment.dimensions"]]
        except ValueError:
            raise ConfigError(f"experiment.dimensions: unknown dimension in {self['experiment.dimensions']}")
        if not dimensions:
            raise ConfigError("experiment.dimensions must name at least one dimension")
        return list(OrderedDict.fromkeys(dimensions))

    def _classifier(self, kind: ClassifierKind, c_param: float) -> ClassifierConfig:
        tolerance = self["classifiers.svm_tolerance"] if kind is ClassifierKind.SVM else self["classifiers.lr_tolerance"]
        return ClassifierConfig(kind, c_param, self["classifiers.balanced"],
                                self["classifiers.max_iterations"], tolerance, self.seed)

    @property
    def classifier_kinds(self) -> List[ClassifierKind]:
        try:
            kinds = [ClassifierKind(k.upper()) for k in self["classifiers.kinds"]]
        except ValueError:
            raise ConfigError(f"classifiers.kinds: unknown classifier in {self['classifiers.kinds']}")
        if not kinds:
            raise ConfigError("classifiers.kinds must name at least one classifier")
        return list(OrderedDict.fromkeys(kinds))

    @property
    def classifiers(self) -> List[ClassifierConfig]:
        """One config per kind at the configured C."""
        return [self._classifier(kind, self["classifiers.c"]) for kind in self.classifier_kinds]

    def c_candidates(self, kind: ClassifierKind) -> List[float]:
        """C values to evaluate for a kind (NB has no C)."""
        if kind is ClassifierKind.NB or not self["classifiers.sweep"]:
            return [self["classifiers.c"]]
        return sorted(set(self["classifiers.c_grid"]))

    def classifier_grid(self, kind: ClassifierKind) -> List[ClassifierConfig]:
        return [self._classifier(kind, c) for c in self.c_candidates(kind)]

    @property
    def selection_rule(self) -> SelectionRule:
        return SelectionRule(self["selection.threshold"], self["selection.min_count"], int(self["selection.ddof"]))

    @property
    def selection_scope(self) -> SelectionScope:
        return SelectionScope(self["selection.scope"])

    @property
    def alternative(self) -> Alternative:
        return Alternative(self["stats.alternative"])

    @property
    def feature_settings(self) -> FeatureSettings:
        return FeatureSettings(
            extended=self["features.extended"],
            absolute_derivative=self["features.absolute_derivative"],
            ibi_screening=self["ibi.screening"],
            ibi_window=self["ibi.window"],
            pnn_thresholds=self["ibi.pnn_thresholds"],
            welch_segment=self["dsp.welch_segment"],
            slow_segment_seconds=self["dsp.slow_segment_seconds"],
            detrend_window=self["dsp.detrend_window"],
            scsr_cutoff=self["features.scsr_cutoff"],
            scvsr_cutoff=self["features.scvsr_cutoff"],
        )

    @property
    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            subjects=self["synthetic.subjects"],
            trials_per_subject=self["synthetic.trials"],
            duration=self["synthetic.duration"],
            heart_rate_range=self["synthetic.heart_rate_range"],
            breath_rate_range=self["synthetic.breath_rate_range"],
            high_fraction=self["synthetic.high_fraction"],
            effects={
                Dimension.AROUSAL: LabelEffect(self["synthetic.arousal_heart_rate"],
                                               self["synthetic.arousal_breathing"],
                                               self["synthetic.arousal_responses"]),
                Dimension.VALENCE: LabelEffect(self["synthetic.valence_heart_rate"],
                                               self["synthetic.valence_breathing"],
                                               self["synthetic.valence_responses"]),
            },
            flavor=DatasetFlavor(self["synthetic.flavor"]),
            noise=self["synthetic.noise"],
            faulty_trials=self["synthetic.faulty_trials"],
        )

    @property
    def summary_classifiers(self) -> List[str]:
        return [k.upper() for k in self["report.summary_classifiers"]]


def load_config(path: Union[str, Path], overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Read a configuration file and apply overrides (None values are ignored).

    Raises:
        ConfigError: If the file is missing or malformed
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e.strerror}")
    values = parse_config_text(text, str(path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    config = ExperimentConfig(values)
    logger.debug("Loaded configuration %s (hash %s)", path, config.config_hash[:12])
    return config
