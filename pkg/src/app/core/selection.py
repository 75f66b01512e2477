"""
Fisher-score feature selection fitted on training rows only.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from app.core.constants import FISHER_DDOF, FISHER_THRESHOLD, MIN_FEATURE_COUNT
from app.core.errors import UndefinedScoreError

# Initialize module logger
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelectionRule:
    """Keep features scoring above `threshold`, topping up to `min_count` by rank."""

    threshold: float = FISHER_THRESHOLD
    min_count: int = MIN_FEATURE_COUNT
    ddof: int = FISHER_DDOF

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")
        if self.min_count < 0:
            raise ValueError(f"min_count must be >= 0, got {self.min_count}")
        if self.ddof not in (0, 1):
            raise ValueError(f"ddof must be 0 or 1, got {self.ddof}")


@dataclass(frozen=True, eq=False)
class SelectionResult:
    """Selected column indices (best first) and the score of every column."""

    indices: Tuple[int, ...]
    scores: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    def selected_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.scores), dtype=bool)
        mask[list(self.indices)] = True
        return mask


def _class_stats(values: np.ndarray, ddof: int) -> Tuple[float, float]:
    mean = float(np.mean(values))
    if values.size - ddof <= 0:
        return mean, 0.0
    return mean, float(np.var(values, ddof=ddof))


def fisher_score(values: Sequence[float], labels: Sequence[int], ddof: int = FISHER_DDOF) -> float:
    """
    Class separability J = |mu1 - mu2| / (var1 + var2).

    Missing values are dropped for this feature only. A zero denominator
    gives +inf when the class means differ and 0 when they agree.

    Args:
        values: Feature column
        labels: Binary labels (0 = Low, 1 = High)
        ddof: 0 for population variances, 1 for sample variances

    Returns:
        Non-negative score

    Raises:
        UndefinedScoreError: If the labels contain a single class
    """
    x = np.asarray(values, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.shape != y.shape:
        raise ValueError(f"{x.size} values for {y.size} labels")
    if np.unique(y).size < 2:
        raise UndefinedScoreError("Fisher score needs both classes")

    present = ~np.isnan(x)
    high, low = x[present & (y == 1)], x[present & (y == 0)]
    if high.size == 0 or low.size == 0:
        return 0.0
    mu_high, var_high = _class_stats(high, ddof)
    mu_low, var_low = _class_stats(low, ddof)
    spread = abs(mu_high - mu_low)
    denominator = var_high + var_low
    if denominator == 0:
        return float("inf") if spread > 0 else 0.0
    return float(spread / denominator)


def fisher_scores(matrix: np.ndarray, labels: Sequence[int], ddof: int = FISHER_DDOF) -> np.ndarray:
    """Score every column of a (rows x features) matrix."""
    x = np.asarray(matrix, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {x.shape}")
    return np.array([fisher_score(x[:, j], labels, ddof) for j in range(x.shape[1])])


def rank_order(scores: np.ndarray) -> List[int]:
    """Column indices by descending score, ties in original order."""
    return sorted(range(len(scores)), key=lambda j: (-scores[j], j))


def select_features(train_matrix: np.ndarray, labels: Sequence[int],
                    rule: SelectionRule = SelectionRule()) -> SelectionResult:
    """
    Threshold selection with a minimum-count fallback.

    Args:
        train_matrix: Training rows only
        labels: Training labels
        rule: Threshold, minimum count and variance convention

    Returns:
        Selected indices sorted by descending score then original index; may
        be empty when `min_count` is 0 and nothing passes the threshold

    Raises:
        UndefinedScoreError: If the training labels hold a single class
    """
    x = np.asarray(train_matrix, dtype=float)
    if x.size == 0 or x.shape[0] == 0:
        raise ValueError("selection needs a non-empty training matrix")
    scores = fisher_scores(x, labels, rule.ddof)
    ranked = rank_order(scores)
    chosen = [j for j in ranked if scores[j] > rule.threshold]
    if len(chosen) < rule.min_count:
        chosen = ranked[: min(rule.min_count, len(ranked))]
    logger.debug("Selected %d of %d features", len(chosen), x.shape[1])
    return SelectionResult(tuple(chosen), scores)
