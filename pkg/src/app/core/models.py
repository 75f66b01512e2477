"""
Data model for trials, signals, ratings and classifier input scenarios.

All types are immutable after construction. Signal arrays are copied and
marked read-only so trials can be shared between worker processes and
exclusion can never alter surviving channel data.
"""

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from app.core.constants import RATING_MAX, RATING_MIN
from app.core.errors import InvalidRatingError


class Channel(str, Enum):
    """Signal kinds. SCG and ADR are derived from ACC_Z and never ingested."""

    ECG = "ECG"
    BVP = "BVP"
    ACC_Z = "ACC_Z"
    SCG = "SCG"
    RSP = "RSP"
    ADR = "ADR"
    EDA = "EDA"
    SKT = "SKT"
    EMG = "EMG"
    EOG = "EOG"

    @property
    def is_derived(self) -> bool:
        return self in DERIVED_CHANNELS

    @property
    def source(self) -> "Channel":
        """Raw channel a (possibly derived) channel is computed from."""
        return Channel.ACC_Z if self.is_derived else self


DERIVED_CHANNELS = frozenset({Channel.SCG, Channel.ADR})
CARDIAC_CHANNELS = (Channel.ECG, Channel.BVP, Channel.SCG)
RESPIRATORY_CHANNELS = (Channel.RSP, Channel.ADR)


class BinaryLabel(IntEnum):
    """Binarized rating; ordered Low < High."""

    LOW = 0
    HIGH = 1

    def __str__(self) -> str:
        return "High" if self is BinaryLabel.HIGH else "Low"


class Dimension(str, Enum):
    VALENCE = "valence"
    AROUSAL = "arousal"


class Peripherals(str, Enum):
    ALL = "all"
    RSP_ONLY = "RSP"
    ADR_ONLY = "ADR"


class DatasetFlavor(str, Enum):
    EMOWEAR = "emowear"
    DEAP = "deap"
    SYNTHETIC = "synthetic"


def _frozen_array(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    if array.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class UniformSignal:
    """Evenly sampled series. `start_time` is trial-relative, in seconds."""

    samples: np.ndarray
    rate: float
    start_time: float = 0.0

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"sampling rate must be positive, got {self.rate}")
        object.__setattr__(self, "samples", _frozen_array(self.samples, "samples"))
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "start_time", float(self.start_time))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.rate

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self.samples)) / self.rate

    def with_samples(self, samples) -> "UniformSignal":
        """Same grid, new values."""
        return UniformSignal(samples, self.rate, self.start_time)

    def to_irregular(self) -> "IrregularSignal":
        return IrregularSignal(self.times, self.samples)


@dataclass(frozen=True, eq=False)
class IrregularSignal:
    """Irregularly sampled series. Timestamp order is checked by the parser and the validator."""

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        timestamps = _frozen_array(self.timestamps, "timestamps")
        values = _frozen_array(self.values, "values")
        if len(timestamps) != len(values):
            raise ValueError(
                f"timestamps ({len(timestamps)}) and values ({len(values)}) differ in length"
            )
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def duration(self) -> float:
        if len(self.timestamps) < 2:
            return 0.0
        return float(self.timestamps[-1] - self.timestamps[0])


Signal = Union[UniformSignal, IrregularSignal]


def _check_rating(name: str, value: Optional[float], required: bool) -> Optional[float]:
    if value is None:
        if required:
            raise InvalidRatingError(f"{name} rating is required")
        return None
    value = float(value)
    if not math.isfinite(value) or not RATING_MIN <= value <= RATING_MAX:
        raise InvalidRatingError(f"{name} rating {value} outside [{RATING_MIN:g}, {RATING_MAX:g}]")
    return value


@dataclass(frozen=True)
class SamRatings:
    """Self-assessment manikin ratings. Only valence and arousal are classified."""

    valence: float
    arousal: float
    dominance: Optional[float] = None
    liking: Optional[float] = None
    familiarity: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "valence", _check_rating("valence", self.valence, True))
        object.__setattr__(self, "arousal", _check_rating("arousal", self.arousal, True))
        for name in ("dominance", "liking", "familiarity"):
            value = getattr(self, name)
            if value is not None and not (isinstance(value, float) and math.isnan(value)):
                object.__setattr__(self, name, _check_rating(name, value, False))
            else:
                object.__setattr__(self, name, None)

    def rating(self, dimension: Dimension) -> float:
        return self.valence if dimension is Dimension.VALENCE else self.arousal


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """One stimulus presentation of one subject."""

    subject_id: str
    video_id: str
    channels: Mapping[Channel, Signal]
    ratings: SamRatings
    faulty: bool = False

    def __post_init__(self):
        channels = dict(self.channels)
        derived = sorted(c.value for c in channels if Channel(c).is_derived)
        if derived:
            raise ValueError(f"derived channels cannot be ingested: {', '.join(derived)}")
        object.__setattr__(self, "channels", MappingProxyType(channels))
        object.__setattr__(self, "subject_id", str(self.subject_id))
        object.__setattr__(self, "video_id", str(self.video_id))

    def __reduce__(self):
        # mapping proxies do not pickle; worker processes rebuild the record
        return (TrialRecord, (self.subject_id, self.video_id, dict(self.channels), self.ratings, self.faulty))

    @property
    def key(self) -> Tuple[str, str]:
        return (self.subject_id, self.video_id)

    def flagged(self) -> "TrialRecord":
        """Copy of the trial marked faulty."""
        return TrialRecord(self.subject_id, self.video_id, self.channels, self.ratings, True)


@dataclass(frozen=True)
class Scenario:
    """
    Classifier input scenario: one cardiac source plus a peripheral selection.

    Under the DEAP flavor the only cardiac source is BVP and "all" also brings
    EMG and EOG; ADR is available only together with SCG.
    """

    cardiac: Channel
    peripherals: Peripherals = Peripherals.ALL
    flavor: DatasetFlavor = DatasetFlavor.EMOWEAR

    def __post_init__(self):
        cardiac = Channel(self.cardiac)
        peripherals = Peripherals(self.peripherals)
        flavor = DatasetFlavor(self.flavor)
        if cardiac not in CARDIAC_CHANNELS:
            raise ValueError(f"{cardiac.value} is not a cardiac channel")
        if peripherals is Peripherals.ADR_ONLY and cardiac is not Channel.SCG:
            raise ValueError("ADR is only combined with SCG")
        if flavor is DatasetFlavor.DEAP:
            if cardiac is not Channel.BVP:
                raise ValueError("DEAP-like data offers BVP as its only cardiac source")
            if peripherals is Peripherals.ADR_ONLY:
                raise ValueError("DEAP-like data has no accelerometer")
        object.__setattr__(self, "cardiac", cardiac)
        object.__setattr__(self, "peripherals", peripherals)
        object.__setattr__(self, "flavor", flavor)

    @property
    def label(self) -> str:
        return f"{self.cardiac.value}+{self.peripherals.value}"

    def channels(self) -> List[Channel]:
        """Channels whose features form the scenario's vector, in output order."""
        if self.peripherals is Peripherals.ADR_ONLY:
            return [Channel.SCG, Channel.ADR]
        if self.peripherals is Peripherals.RSP_ONLY:
            return [self.cardiac, Channel.RSP]
        if self.flavor is DatasetFlavor.DEAP:
            return [self.cardiac, Channel.RSP, Channel.EDA, Channel.SKT, Channel.EMG, Channel.EOG]
        peripheral = [Channel.RSP]
        if self.cardiac is Channel.SCG:
            peripheral.append(Channel.ADR)
        return [self.cardiac, *peripheral, Channel.EDA, Channel.SKT]

    def required_channels(self) -> List[Channel]:
        """Raw channels a trial must carry for this scenario."""
        required: List[Channel] = []
        for channel in self.channels():
            if channel.source not in required:
                required.append(channel.source)
        return required

    @classmethod
    def parse(cls, text: str, flavor: DatasetFlavor = DatasetFlavor.EMOWEAR) -> "Scenario":
        """Parse labels such as ``SCG+ADR``, ``BVP+all`` or ``ECG+RSP``."""
        cardiac, sep, rest = text.strip().partition("+")
        if not sep:
            raise ValueError(f"scenario '{text}' must look like CARDIAC+PERIPHERALS")
        lookup: Dict[str, Peripherals] = {p.value.lower(): p for p in Peripherals}
        try:
            peripherals = lookup[rest.strip().lower()]
            channel = Channel(cardiac.strip().upper())
        except (KeyError, ValueError):
            raise ValueError(f"unknown scenario '{text}'")
        return cls(channel, peripherals, flavor)


def default_scenarios(flavor: DatasetFlavor) -> List[Scenario]:
    """The input scenarios studied for a dataset flavor."""
    if flavor is DatasetFlavor.DEAP:
        return [Scenario(Channel.BVP, Peripherals.ALL, flavor)]
    scenarios = [Scenario(c, Peripherals.ALL, flavor) for c in (Channel.ECG, Channel.BVP, Channel.SCG)]
    scenarios += [Scenario(c, Peripherals.RSP_ONLY, flavor) for c in (Channel.ECG, Channel.BVP, Channel.SCG)]
    scenarios.append(Scenario(Channel.SCG, Peripherals.ADR_ONLY, flavor))
    return scenarios


@dataclass(frozen=True)
class ValidationFinding:
    kind: str
    channel: Optional[Channel]
    detail: str
    index: Optional[int] = None


@dataclass(frozen=True)
class ValidationReport:
    subject_id: str
    video_id: str
    findings: Tuple[ValidationFinding, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.findings

    def __len__(self) -> int:
        return len(self.findings)
