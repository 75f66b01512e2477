"""
Module for reading and writing datasets in the trial-file schema.

Layout under the dataset root::

    <subject>/ratings.tsv             video_id, valence, arousal, dominance, liking, familiarity
    <subject>/<video>/<CHANNEL>.tsv   "# channel=ECG units=mV rate=256" then timestamp, value
    exclusions.tsv                    subject_id, video_id, reason (video "*" = whole subject)
    channel_map.tsv                   optional: stem, channel (file stem -> channel kind)

All files are tab-delimited UTF-8.
"""

import logging
import re
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.core.errors import InvalidRatingError, ParseError
from app.core.models import (
    Channel,
    DatasetFlavor,
    IrregularSignal,
    SamRatings,
    Signal,
    TrialRecord,
    UniformSignal,
)
from app.core.utils import natural_key

# Initialize module logger
logger = logging.getLogger(__name__)

RATINGS_FILE = "ratings.tsv"
EXCLUSIONS_FILE = "exclusions.tsv"
CHANNEL_MAP_FILE = "channel_map.tsv"
RATING_COLUMNS = ("video_id", "valence", "arousal", "dominance", "liking", "familiarity")
SIGNAL_COLUMNS = ("timestamp", "value")
WHOLE_SUBJECT = "*"

# relative deviation of a sampling step from the nominal period still treated as uniform
JITTER_TOLERANCE = 0.01

UNITS = {
    Channel.ECG: "mV", Channel.BVP: "a.u.", Channel.ACC_Z: "g", Channel.RSP: "a.u.",
    Channel.EDA: "uS", Channel.SKT: "degC", Channel.EMG: "uV", Channel.EOG: "uV",
}

_HEADER_FIELD = re.compile(r"(\w+)=(\S+)")

PathLike = Union[str, Path]


def parse_header(path: Path, line: str) -> Dict[str, str]:
    """
    Parse a ``# key=value ...`` channel header line.

    Args:
        path: File the line came from (for error messages)
        line: Raw first line

    Returns:
        Dictionary of header fields

    Raises:
        ParseError: If the line is not a header or lacks the channel field
    """
    if not line.startswith("#"):
        raise ParseError(path, 1, "missing '# channel=... units=... rate=...' header")
    fields = dict(_HEADER_FIELD.findall(line))
    if "channel" not in fields:
        raise ParseError(path, 1, "header does not name the channel")
    return fields


def _read_table(path: Path, columns: Sequence[str], skip: int = 0) -> pd.DataFrame:
    """Read a tab-delimited file as strings and check its column names."""
    try:
        frame = pd.read_csv(path, sep="\t", dtype=str, skiprows=skip, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParseError(path, None, f"unreadable table: {e}")
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParseError(path, skip + 1, f"missing columns: {', '.join(missing)}")
    return frame


def _numeric(path: Path, frame: pd.DataFrame, column: str, first_line: int, optional: bool = False) -> np.ndarray:
    text = frame[column].str.strip()
    values = pd.to_numeric(text, errors="coerce")
    # a literal "nan" is data for validation to report; other unparsable cells are schema errors
    bad = values.isna() & (text.str.lower() != "nan")
    if optional:
        bad &= text != ""
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(path, first_line + row, f"'{frame[column].iloc[row]}' is not a number in column {column}")
    return values.to_numpy(dtype=float)


def to_signal(timestamps: np.ndarray, values: np.ndarray, channel: Channel,
              rate: Optional[float] = None) -> Signal:
    """
    Choose the in-memory representation of a channel.

    ACC_Z always stays irregular. Other channels become uniform when every
    sampling step is within the jitter tolerance of the nominal period (or of
    the median step when no rate is given).
    """
    if channel is Channel.ACC_Z or len(timestamps) < 2:
        return IrregularSignal(timestamps, values)
    steps = np.diff(timestamps)
    period = 1.0 / rate if rate else float(np.median(steps))
    if period > 0 and np.all(np.abs(steps - period) <= JITTER_TOLERANCE * period):
        return UniformSignal(values, rate or 1.0 / period, float(timestamps[0]))
    logger.debug("%s kept irregular (steps %.6g-%.6g s)", channel.value, steps.min(), steps.max())
    return IrregularSignal(timestamps, values)


def read_channel_file(path: PathLike, channel_map: Optional[Dict[str, Channel]] = None) -> Tuple[Channel, Signal]:
    """
    Read one ``<CHANNEL>.tsv`` trial file.

    Raises:
        ParseError: On a bad header, non-numeric cells or non-increasing timestamps
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        header = parse_header(path, handle.readline().rstrip("\n"))
    name = header["channel"]
    mapped = (channel_map or {}).get(path.stem)
    try:
        channel = mapped or Channel(name.upper())
    except ValueError:
        raise ParseError(path, 1, f"unknown channel kind '{name}'")
    if channel.is_derived:
        raise ParseError(path, 1, f"{channel.value} is derived and cannot be ingested")

    rate = None
    if "rate" in header:
        try:
            rate = float(header["rate"])
        except ValueError:
            raise ParseError(path, 1, f"rate '{header['rate']}' is not a number")
        if not rate > 0:
            raise ParseError(path, 1, f"rate must be positive, got {rate:g}")

    frame = _read_table(path, SIGNAL_COLUMNS, skip=1)
    first_data_line = 3
    timestamps = _numeric(path, frame, "timestamp", first_data_line)
    values = _numeric(path, frame, "value", first_data_line)
    steps = np.diff(timestamps)
    broken = np.flatnonzero(~(steps > 0))
    if broken.size:
        offset = int(broken[0]) + 1
        raise ParseError(path, first_data_line + offset,
                         f"timestamps not strictly increasing at offset {offset} "
                         f"({timestamps[offset - 1]:g} -> {timestamps[offset]:g})")
    return channel, to_signal(timestamps, values, channel, rate)


def read_ratings(path: PathLike) -> Dict[str, SamRatings]:
    """Ratings of one subject keyed by video."""
    path = Path(path)
    frame = _read_table(path, RATING_COLUMNS[:3])
    ratings: Dict[str, SamRatings] = {}
    numbers = {c: _numeric(path, frame, c, 2, optional=c not in ("valence", "arousal"))
               for c in RATING_COLUMNS[1:] if c in frame.columns}
    for row, video in enumerate(frame["video_id"].str.strip()):
        if not video:
            raise ParseError(path, row + 2, "empty video_id")
        if video in ratings:
            raise ParseError(path, row + 2, f"duplicate ratings for video {video}")
        values = {c: (None if np.isnan(v[row]) and c not in ("valence", "arousal") else float(v[row]))
                  for c, v in numbers.items()}
        try:
            ratings[video] = SamRatings(**values)
        except InvalidRatingError as e:
            raise ParseError(path, row + 2, str(e))
    return ratings


def read_exclusions(path: PathLike) -> List[Tuple[str, str, str]]:
    """(subject_id, video_id, reason) rows of the exclusions sidecar."""
    path = Path(path)
    if not path.exists():
        return []
    frame = _read_table(path, ("subject_id", "video_id"))
    reasons = frame["reason"] if "reason" in frame.columns else pd.Series([""] * len(frame))
    return [(s.strip(), v.strip(), r.strip()) for s, v, r in zip(frame["subject_id"], frame["video_id"], reasons)]


def read_channel_map(path: PathLike) -> Dict[str, Channel]:
    """File stem to channel kind mapping for vendor-named trial files."""
    path = Path(path)
    if not path.exists():
        return {}
    frame = _read_table(path, ("stem", "channel"))
    mapping = {}
    for row, (stem, name) in enumerate(zip(frame["stem"], frame["channel"])):
        try:
            mapping[stem.strip()] = Channel(name.strip().upper())
        except ValueError:
            raise ParseError(path, row + 2, f"unknown channel kind '{name}'")
    return mapping


def _sorted_dirs(path: Path) -> List[Path]:
    return sorted((p for p in path.iterdir() if p.is_dir()), key=lambda p: natural_key(p.name))


def load_dataset(root: PathLike, flavor: DatasetFlavor = DatasetFlavor.EMOWEAR,
                 extra_exclusions: Optional[PathLike] = None) -> List[TrialRecord]:
    """
    Load every trial under a dataset root.

    Args:
        root: Dataset directory
        flavor: Dataset flavor; DEAP-like datasets may not carry ACC_Z

    Returns:
        One TrialRecord per (subject, video) in natural order, with faulty
        flags from the exclusions sidecar applied

    Raises:
        ParseError: On any malformed file or a trial without ratings
    """
    root = Path(root)
    flavor = DatasetFlavor(flavor)
    if not root.is_dir():
        raise ParseError(root, None, "dataset directory not found")
    channel_map = read_channel_map(root / CHANNEL_MAP_FILE)
    exclusions = read_exclusions(root / EXCLUSIONS_FILE)
    if extra_exclusions is not None:
        if not Path(extra_exclusions).exists():
            raise ParseError(extra_exclusions, None, "exclusions file not found")
        exclusions += read_exclusions(extra_exclusions)
    flagged_subjects = {s for s, v, _ in exclusions if v == WHOLE_SUBJECT}
    flagged_trials = {(s, v) for s, v, _ in exclusions if v != WHOLE_SUBJECT}

    trials: List[TrialRecord] = []
    for subject_dir in _sorted_dirs(root):
        ratings_path = subject_dir / RATINGS_FILE
        if not ratings_path.exists():
            raise ParseError(ratings_path, None, "subject has no ratings file")
        ratings = read_ratings(ratings_path)
        subject = subject_dir.name
        for video_dir in _sorted_dirs(subject_dir):
            video = video_dir.name
            if video not in ratings:
                raise ParseError(ratings_path, None, f"no ratings for video {video}")
            channels: Dict[Channel, Signal] = {}
            for path in sorted(video_dir.glob("*.tsv"), key=lambda p: natural_key(p.name)):
                channel, sig = read_channel_file(path, channel_map)
                if channel in channels:
                    raise ParseError(path, 1, f"second file for channel {channel.value}")
                if channel is Channel.ACC_Z and flavor is DatasetFlavor.DEAP:
                    raise ParseError(path, 1, "DEAP-like datasets carry no accelerometer")
                channels[channel] = sig
            trial = TrialRecord(subject, video, channels, ratings[video])
            if subject in flagged_subjects or (subject, video) in flagged_trials:
                trial = trial.flagged()
            trials.append(trial)
        unused = set(ratings) - {d.name for d in _sorted_dirs(subject_dir)}
        if unused:
            logger.warning("Subject %s has ratings without trial data: %s",
                           subject, ", ".join(sorted(unused, key=natural_key)))

    logger.info("Loaded %d trials of %d subjects from %s", len(trials), len({t.subject_id for t in trials}), root)
    return trials


def _write_signal(path: Path, channel: Channel, sig: Signal) -> None:
    if isinstance(sig, UniformSignal):
        times, values = sig.times, sig.samples
        rate = f" rate={sig.rate:g}"
    else:
        times, values = sig.timestamps, sig.values
        rate = ""
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"# channel={channel.value} units={UNITS.get(channel, 'a.u.')}{rate}\n")
        pd.DataFrame({"timestamp": times, "value": values}).to_csv(
            handle, sep="\t", index=False, float_format="%.10g", lineterminator="\n")


def write_dataset(trials: Iterable[TrialRecord], root: PathLike,
                  exclusions: Sequence[Tuple[str, str, str]] = ()) -> Path:
    """
    Write trials in the trial-file schema.

    Faulty trials are recorded in the exclusions sidecar next to any extra
    `exclusions` rows.

    Returns:
        The dataset root
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    by_subject: Dict[str, List[TrialRecord]] = {}
    for trial in trials:
        by_subject.setdefault(trial.subject_id, []).append(trial)

    rows = list(exclusions)
    for subject, subject_trials in by_subject.items():
        subject_dir = root / subject
        subject_dir.mkdir(exist_ok=True)
        ratings = pd.DataFrame([
            {"video_id": t.video_id, **{c: getattr(t.ratings, c) for c in RATING_COLUMNS[1:]}}
            for t in subject_trials
        ], columns=list(RATING_COLUMNS))
        ratings.to_csv(subject_dir / RATINGS_FILE, sep="\t", index=False, float_format="%.10g",
                       na_rep="", lineterminator="\n")
        for trial in subject_trials:
            video_dir = subject_dir / trial.video_id
            video_dir.mkdir(exist_ok=True)
            for channel, sig in sorted(trial.channels.items(), key=lambda item: item[0].value):
                _write_signal(video_dir / f"{channel.value}.tsv", channel, sig)
            if trial.faulty:
                rows.append((trial.subject_id, trial.video_id, "faulty trial"))

    if rows:
        pd.DataFrame(rows, columns=["subject_id", "video_id", "reason"]).to_csv(
            root / EXCLUSIONS_FILE, sep="\t", index=False, lineterminator="\n")
    logger.info("Wrote %d subjects to %s", len(by_subject), root)
    return root
