"""
Exception hierarchy for scg-emotion.

Data-shaped failures derive from ValueError as well, so callers that catch
ValueError around parsing and numeric code keep working.
"""

from typing import Any, Dict, Optional


class ScgEmotionError(Exception):
    """Base class for every error raised by the pipeline."""


class InvalidRatingError(ScgEmotionError, ValueError):
    """A SAM rating is non-finite or outside the 1-9 scale."""


class EmptyDatasetError(ScgEmotionError):
    """No trials survive loading or exclusion."""


class InsufficientDataError(ScgEmotionError, ValueError):
    """A signal is too short for the requested operation."""


class InvalidBandError(ScgEmotionError, ValueError):
    """A pass-band is malformed or does not fit the signal's Nyquist range."""


class EmptyBeatsError(ScgEmotionError):
    """A detector found no events."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InsufficientBeatsError(ScgEmotionError):
    """Too few plausible intervals survive screening."""


class MissingChannelError(ScgEmotionError, KeyError):
    """A trial lacks a channel required by the scenario."""

    def __init__(self, channel: Any, message: Optional[str] = None):
        self.channel = channel
        super().__init__(message or f"missing channel {getattr(channel, 'value', channel)}")

    def __str__(self) -> str:
        return str(self.args[0])


class UndefinedScoreError(ScgEmotionError):
    """Fisher score requested on a single-class sample."""


class EmptySelectionError(ScgEmotionError):
    """Feature selection kept no columns."""


class DegenerateFitError(ScgEmotionError):
    """A classifier was asked to fit single-class data."""


class ShapeError(ScgEmotionError, ValueError):
    """Feature dimensionality does not match the fitted model."""


class EmptyEvaluationError(ScgEmotionError, ValueError):
    """Metrics requested on zero predictions."""


class InsufficientTrialsError(ScgEmotionError):
    """A subject has fewer than two trials for LOVO."""


class SubjectEvaluationError(ScgEmotionError):
    """Every fold of a subject failed."""


class InsufficientSubjectsError(ScgEmotionError):
    """Aggregation requested on fewer than two subjects."""


class ParseError(ScgEmotionError, ValueError):
    """A dataset file does not follow the trial-file schema."""

    def __init__(self, path: Any, line: Optional[int], message: str):
        self.path = str(path)
        self.line = line
        location = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{location}: {message}")


class ConfigError(ScgEmotionError, ValueError):
    """The experiment configuration is malformed."""


class SyntheticSpecError(ScgEmotionError, ValueError):
    """A synthetic dataset specification is infeasible."""
