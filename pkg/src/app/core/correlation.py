"""
Pearson correlation of per-subject scores across setups.
"""

import logging
from dataclasses import dataclass
from typing import List, Mapping, Sequence, Tuple

import numpy as np
from scipy import stats

from app.core.errors import InsufficientDataError, ShapeError

# Initialize module logger
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrelationCell:
    """Correlation of two setups; r and p are NaN when either list has no variance."""

    r: float
    p: float
    n: int

    @property
    def defined(self) -> bool:
        return not np.isnan(self.r)


def correlation_p_value(r: float, n: int) -> float:
    """Two-sided p of H0: rho = 0 through t = r * sqrt((n - 2) / (1 - r^2))."""
    if np.isnan(r):
        return float("nan")
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t = r * np.sqrt(df / (1.0 - r * r))
    return float(2.0 * stats.t.sf(abs(t), df))


def _correlate(a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    if a.shape != b.shape:
        raise ShapeError(f"{a.size} scores paired with {b.size}")
    if a.size < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan"), float("nan")
    result = stats.pearsonr(a, b)
    return float(np.clip(result[0], -1.0, 1.0)), float(result[1])


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    return _correlate(np.asarray(x, dtype=float), np.asarray(y, dtype=float))[0]


def pearson_matrix(per_setup_scores: Mapping[str, Sequence[float]]) -> Tuple[List[str], List[List[CorrelationCell]]]:
    """
    Pairwise Pearson correlations between setups.

    Args:
        per_setup_scores: Per-subject scores of each setup, all in the same
            subject order

    Returns:
        Setup names (insertion order) and the symmetric cell matrix; the
        diagonal of a setup with variance is r = 1, p = 0

    Raises:
        InsufficientDataError: If fewer than three subjects are paired
    """
    names = list(per_setup_scores)
    columns = [np.asarray(per_setup_scores[name], dtype=float) for name in names]
    if not columns:
        return [], []
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ShapeError("setups must share the same subjects")
    if n < 3:
        raise InsufficientDataError(f"correlation needs at least 3 subjects, got {n}")

    flat = [name for name, c in zip(names, columns) if np.ptp(c) == 0]
    if flat:
        logger.warning("Correlation undefined for setups without variance: %s", ", ".join(flat))

    cells = [[None] * len(names) for _ in names]
    for i in range(len(names)):
        for j in range(i, len(names)):
            if i == j:
                r = 1.0 if np.ptp(columns[i]) > 0 else float("nan")
                cell = CorrelationCell(r, correlation_p_value(r, n), n)
            else:
                cell = CorrelationCell(*_correlate(columns[i], columns[j]), n)
            cells[i][j] = cells[j][i] = cell
    return names, cells
