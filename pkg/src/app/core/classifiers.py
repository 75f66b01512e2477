"""
Gaussian naive Bayes, linear SVM and logistic regression for the binary
High/Low problem, plus the baseline voting strategies and train-fold
standardization.

SVM and LR use L2 regularization and optional balanced class weights
n / (2 * n_class). Ties (equal posteriors, zero decision value, probability
exactly 0.5) predict Low.
"""

import logging
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression
from sklearn.naive_bayes import GaussianNB
from sklearn.preprocessing import StandardScaler
from sklearn.svm import LinearSVC

from app.core.constants import (
    DEFAULT_C,
    DEFAULT_SEED,
    LR_TOLERANCE,
    MAX_ITERATIONS,
    NB_VAR_SMOOTHING,
    SVM_TOLERANCE,
)
from app.core.errors import DegenerateFitError, ShapeError
from app.core.models import BinaryLabel

# Initialize module logger
logger = logging.getLogger(__name__)


class ClassifierKind(str, Enum):
    NB = "NB"
    SVM = "SVM"
    LR = "LR"

    @property
    def standardized(self) -> bool:
        return self is not ClassifierKind.NB


class BaselineStrategy(str, Enum):
    RANDOM = "Random"
    MAJORITY = "Majority"
    RATIO = "Ratio"


@dataclass(frozen=True)
class ClassifierConfig:
    kind: ClassifierKind
    c_param: float = DEFAULT_C
    balanced_weights: bool = True
    max_iterations: int = MAX_ITERATIONS
    tolerance: Optional[float] = None
    rng_seed: int = DEFAULT_SEED

    def __post_init__(self):
        object.__setattr__(self, "kind", ClassifierKind(self.kind))
        if not self.c_param > 0:
            raise ValueError(f"C must be positive, got {self.c_param}")
        if self.tolerance is None:
            default = SVM_TOLERANCE if self.kind is ClassifierKind.SVM else LR_TOLERANCE
            object.__setattr__(self, "tolerance", default)
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")

    @property
    def label(self) -> str:
        return self.kind.value

    def with_c(self, c_param: float) -> "ClassifierConfig":
        return replace(self, c_param=c_param)


@dataclass(frozen=True, eq=False)
class StandardizationStats:
    """A fitted scaler; features constant on the training rows map to 0."""

    scaler: StandardScaler

    @property
    def mean(self) -> np.ndarray:
        return self.scaler.mean_

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.scaler.var_)

    @property
    def constant(self) -> np.ndarray:
        """Indices of zero-variance features (mapped to 0)."""
        return np.flatnonzero(self.scaler.var_ == 0)


def standardize_fit(train_features: np.ndarray) -> StandardizationStats:
    """Per-feature train mean and (population) standard deviation."""
    x = np.asarray(train_features, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("standardization needs a non-empty 2-D training matrix")
    return StandardizationStats(StandardScaler().fit(x))


def standardize_apply(stats: StandardizationStats, features: np.ndarray) -> np.ndarray:
    """z-scores with the training statistics; zero-variance features become 0."""
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != len(stats.mean):
        raise ShapeError(f"expected {len(stats.mean)} features, got {x.shape[-1]}")
    z = stats.scaler.transform(x.reshape(-1, x.shape[-1])).reshape(x.shape)
    z[..., stats.constant] = 0.0
    return z


def class_weights(labels: np.ndarray, balanced: bool) -> np.ndarray:
    """Per-sample weights n / (2 * n_class), or ones."""
    y = np.asarray(labels, dtype=int)
    if not balanced:
        return np.ones(len(y))
    counts = np.bincount(y, minlength=2).astype(float)
    return len(y) / (2.0 * counts[y])


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Fitted classifier with the preprocessing it was trained with."""

    kind: ClassifierKind
    config: ClassifierConfig
    estimator: Union[GaussianNB, LogisticRegression, LinearSVC]
    imputation: np.ndarray
    standardization: Optional[StandardizationStats] = None
    selected: Tuple[int, ...] = ()
    converged: bool = True
    iterations: int = 0
    objective: float = float("nan")
    warnings: Tuple[str, ...] = ()

    @property
    def n_features(self) -> int:
        return len(self.imputation)

    @property
    def parameters(self) -> Dict[str, np.ndarray]:
        """Learned numbers by name: class moments for NB, weights and bias otherwise."""
        est = self.estimator
        if self.kind is ClassifierKind.NB:
            return {"means": est.theta_, "variances": est.var_, "log_priors": np.log(est.class_prior_)}
        return {"weights": est.coef_[0], "bias": est.intercept_}

    def parameter_vector(self) -> np.ndarray:
        """All learned numbers in a fixed order (used for hashing)."""
        parameters = self.parameters
        parts = [np.ravel(parameters[k]) for k in sorted(parameters)]
        parts.append(self.imputation)
        if self.standardization is not None:
            parts += [self.standardization.mean, self.standardization.std]
        return np.concatenate(parts)


def _check_binary(labels: Sequence[int]) -> np.ndarray:
    y = np.asarray([int(v) for v in labels], dtype=int)
    if np.unique(y).size < 2:
        raise DegenerateFitError("training labels hold a single class")
    return y


def impute(features: np.ndarray, fill: np.ndarray) -> np.ndarray:
    """Replace missing values column-wise with `fill`."""
    x = np.array(features, dtype=float, copy=True)
    rows, cols = np.nonzero(np.isnan(x))
    x[rows, cols] = fill[cols]
    return x


def imputation_values(train_features: np.ndarray) -> np.ndarray:
    """Column means over present values; 0 where a column is entirely missing."""
    x = np.asarray(train_features, dtype=float)
    present = ~np.isnan(x)
    counts = present.sum(axis=0)
    sums = np.where(present, x, 0.0).sum(axis=0)
    return np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)


def logistic_objective(params: np.ndarray, x: np.ndarray, signs: np.ndarray,
                       weights: np.ndarray, c_param: float) -> Tuple[float, np.ndarray]:
    """
    Penalized logistic loss and its gradient.

    f(w, b) = 0.5 * |w|^2 + C * sum_i s_i * log(1 + exp(-y_i (w.x_i + b)))
    with y_i in {-1, +1}; the bias is not penalized.
    """
    w, b = params[:-1], params[-1]
    margins = signs * (x @ w + b)
    loss = 0.5 * float(w @ w) + c_param * float(np.sum(weights * np.logaddexp(0.0, -margins)))
    coefficient = -c_param * weights * signs * expit(-margins)
    gradient = np.empty_like(params)
    gradient[:-1] = w + x.T @ coefficient
    gradient[-1] = np.sum(coefficient)
    return loss, gradient


def hinge_objective(params: np.ndarray, x: np.ndarray, signs: np.ndarray,
                    weights: np.ndarray, c_param: float) -> float:
    """Primal SVM objective 0.5 * |(w, b)|^2 + C * sum_i s_i * max(0, 1 - y_i (w.x_i + b))."""
    margins = signs * (x @ params[:-1] + params[-1])
    return 0.5 * float(params @ params) + c_param * float(np.sum(weights * np.maximum(0.0, 1.0 - margins)))


def _estimator(config: ClassifierConfig):
    class_weight = "balanced" if config.balanced_weights else None
    if config.kind is ClassifierKind.NB:
        return GaussianNB(var_smoothing=NB_VAR_SMOOTHING)
    if config.kind is ClassifierKind.LR:
        return LogisticRegression(C=config.c_param, solver="lbfgs", tol=config.tolerance,
                                  max_iter=config.max_iterations, class_weight=class_weight)
    # liblinear's dual coordinate descent; the bias is a penalized constant feature
    return LinearSVC(C=config.c_param, loss="hinge", dual=True, tol=config.tolerance,
                     max_iter=config.max_iterations, class_weight=class_weight,
                     random_state=config.rng_seed % 2 ** 32)


def fit(train_features: np.ndarray, train_labels: Sequence[int], config: ClassifierConfig,
        selected: Sequence[int] = ()) -> FittedModel:
    """
    Fit a classifier on selected training features.

    Missing values are imputed with the training column means. SVM and LR
    train on z-scored features; NB trains on the raw features.

    Args:
        train_features: Training rows, already restricted to the selected columns
        train_labels: Binary labels (0 = Low, 1 = High)
        config: Classifier settings
        selected: Column indices the features were selected from (recorded only)

    Returns:
        Fitted model; non-convergence is reported through `warnings`

    Raises:
        DegenerateFitError: If the labels hold a single class
    """
    x = np.asarray(train_features, dtype=float)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D training matrix, got shape {x.shape}")
    y = _check_binary(train_labels)
    if x.shape[0] != len(y):
        raise ShapeError(f"{x.shape[0]} rows for {len(y)} labels")

    fill = imputation_values(x)
    x = impute(x, fill)
    stats = None
    if config.kind.standardized:
        stats = standardize_fit(x)
        x = standardize_apply(stats, x)

    estimator = _estimator(config)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        estimator.fit(x, y)
    converged = not any(issubclass(w.category, ConvergenceWarning) for w in caught)

    iterations, objective = 0, float("nan")
    if config.kind is ClassifierKind.NB:
        if estimator.epsilon_ <= 0:
            # every training column is constant
            estimator.var_ += NB_VAR_SMOOTHING
    else:
        iterations = int(np.max(estimator.n_iter_))
        params = np.append(estimator.coef_[0], estimator.intercept_[0])
        signs = np.where(y == 1, 1.0, -1.0)
        weights = class_weights(y, config.balanced_weights)
        if config.kind is ClassifierKind.LR:
            objective = logistic_objective(params, x, signs, weights, config.c_param)[0]
        else:
            objective = hinge_objective(params, x, signs, weights, config.c_param)

    notes = ()
    if not converged:
        message = f"{config.kind.value} did not converge within {config.max_iterations} iterations"
        logger.warning(message)
        notes = (message,)
    return FittedModel(config.kind, config, estimator, fill, stats, tuple(int(i) for i in selected),
                       converged, iterations, objective, notes)


def decision_values(model: FittedModel, features: np.ndarray) -> np.ndarray:
    """Score whose sign decides High (> 0) versus Low (<= 0)."""
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != model.n_features:
        raise ShapeError(f"model expects {model.n_features} features, got {x.shape[1]}")
    x = impute(x, model.imputation)
    if model.standardization is not None:
        x = standardize_apply(model.standardization, x)
    if model.kind is ClassifierKind.NB:
        posteriors = model.estimator.predict_log_proba(x)
        return posteriors[:, 1] - posteriors[:, 0]
    return model.estimator.decision_function(x)


def predict(model: FittedModel, features: np.ndarray) -> List[BinaryLabel]:
    """Predicted labels; a zero decision value (a tie) is Low."""
    return [BinaryLabel.HIGH if d > 0 else BinaryLabel.LOW for d in decision_values(model, features)]


def predict_proba(model: FittedModel, features: np.ndarray) -> np.ndarray:
    """High-class probability of an LR model."""
    if model.kind is not ClassifierKind.LR:
        raise ValueError("probabilities are only defined for logistic regression")
    return expit(decision_values(model, features))


# Baselines

def majority_label(labels: Sequence[int]) -> BinaryLabel:
    """Most frequent label; an even split is High."""
    y = np.asarray([int(v) for v in labels], dtype=int)
    return BinaryLabel.HIGH if 2 * int(y.sum()) >= len(y) else BinaryLabel.LOW


def baseline_vote(strategy: BaselineStrategy, train_labels: Sequence[int], n_predictions: int,
                  rng: Union[np.random.Generator, int]) -> List[BinaryLabel]:
    """
    Reference predictions that ignore the features.

    Args:
        strategy: Random (fair coin), Majority (constant majority label) or
            Ratio (draws with P(High) equal to the training High fraction)
        train_labels: Labels the strategy is fitted on
        n_predictions: Number of predictions to draw
        rng: Generator or seed

    Returns:
        Predicted labels
    """
    y = np.asarray([int(v) for v in train_labels], dtype=int)
    if y.size == 0:
        raise ValueError("baseline voting needs at least one training label")
    if n_predictions < 1:
        raise ValueError(f"n_predictions must be >= 1, got {n_predictions}")
    generator = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    strategy = BaselineStrategy(strategy)
    if strategy is BaselineStrategy.MAJORITY:
        draws = np.full(n_predictions, int(majority_label(y)))
    elif strategy is BaselineStrategy.RANDOM:
        draws = generator.integers(0, 2, size=n_predictions)
    else:
        draws = (generator.random(n_predictions) < y.mean()).astype(int)
    return [BinaryLabel(int(v)) for v in draws]


def describe_model(model: FittedModel, feature_names: Sequence[str]) -> str:
    """Plain-text parameter listing of a fitted model."""
    lines = [
        f"kind\t{model.kind.value}",
        f"C\t{model.config.c_param:g}",
        f"converged\t{model.converged}",
        f"iterations\t{model.iterations}",
        f"objective\t{model.objective:.6g}",
        "feature\timputation\tmean\tstd\t" + ("mean_low\tmean_high\tvar_low\tvar_high"
                                             if model.kind is ClassifierKind.NB else "weight"),
    ]
    for j, name in enumerate(feature_names):
        mean = model.standardization.mean[j] if model.standardization is not None else float("nan")
        std = model.standardization.std[j] if model.standardization is not None else float("nan")
        row = [name, f"{model.imputation[j]:.6g}", f"{mean:.6g}", f"{std:.6g}"]
        if model.kind is ClassifierKind.NB:
            p = model.parameters
            row += [f"{p['means'][0, j]:.6g}", f"{p['means'][1, j]:.6g}",
                    f"{p['variances'][0, j]:.6g}", f"{p['variances'][1, j]:.6g}"]
        else:
            row.append(f"{model.parameters['weights'][j]:.6g}")
        lines.append("\t".join(row))
    if model.kind is ClassifierKind.NB:
        lines.append(f"log_priors\t{model.parameters['log_priors'][0]:.6g}\t{model.parameters['log_priors'][1]:.6g}")
    else:
        lines.append(f"bias\t{float(model.parameters['bias'][0]):.6g}")
    return "\n".join(lines) + "\n"
