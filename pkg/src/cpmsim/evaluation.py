"""Performance metrics and the development/validation strategies.

Six strategies determine whether the outcome enters the imputation model
at development, and whether validation imputes with the outcome, imputes
without it, or uses the pre-missingness data. When validation itself is
multiply imputed, each completed validation set is scored separately and
the metrics averaged (pooled performance).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .datagen import Cohort
from .glm import fit_logistic, logit, predict_probabilities
from .cpm import CpmSpec, PooledCpm, build_design, fit_cpm
from .imputation import (
    CompletedData,
    completed_from_truth,
    fit_imputation_model,
    impute_deterministic,
    impute_multiple,
)

__all__ = [
    "METHODS",
    "STRATEGY_TAGS",
    "VAL_COMPLETE",
    "VAL_WITH_Y",
    "VAL_WITHOUT_Y",
    "IncompatibleStrategyError",
    "DegenerateOutcomeError",
    "StrategySpec",
    "MetricSet",
    "StrategyResult",
    "citl",
    "calibration_slope",
    "c_statistic",
    "brier",
    "evaluate_predictions",
    "pool_metric_sets",
    "run_strategy",
]

METHODS = ("complete", "RI", "MI")

VAL_COMPLETE = "complete_data"
VAL_WITH_Y = "impute_with_Y"
VAL_WITHOUT_Y = "impute_without_Y"

# tag -> (dev_uses_outcome, val_mode). Missingness is deployable only when
# validation imputes without the outcome, since Y is unknown at prediction.
_STRATEGIES = {
    "DA+VA": (False, VAL_COMPLETE),
    "DY+VY": (True, VAL_WITH_Y),
    "DnoY+VnoY": (False, VAL_WITHOUT_Y),
    "DY+VnoY": (True, VAL_WITHOUT_Y),
    "DY+VA": (True, VAL_COMPLETE),
    "DnoY+VA": (False, VAL_COMPLETE),
}

STRATEGY_TAGS = tuple(_STRATEGIES)


class IncompatibleStrategyError(ValueError):
    """Method and strategy cannot be combined."""


class DegenerateOutcomeError(ValueError):
    """The outcome vector contains a single class."""


@dataclass(frozen=True)
class StrategySpec:
    """One development/validation strategy, identified by its tag."""

    tag: str

    def __post_init__(self):
        if self.tag not in _STRATEGIES:
            raise ValueError(f"unknown strategy {self.tag!r}, expected one of {STRATEGY_TAGS}")

    @property
    def dev_uses_outcome(self) -> bool:
        return _STRATEGIES[self.tag][0]

    @property
    def val_mode(self) -> str:
        return _STRATEGIES[self.tag][1]

    @property
    def missingness_allowed_at_deployment(self) -> bool:
        return self.val_mode == VAL_WITHOUT_Y


@dataclass(frozen=True)
class MetricSet:
    """Calibration-in-the-large, slope, C-statistic and Brier score."""

    citl: float
    slope: float
    cstat: float
    brier: float
    citl_converged: bool
    slope_converged: bool


@dataclass(frozen=True)
class StrategyResult:
    metrics: MetricSet
    coefficients: PooledCpm
    per_imputation_metrics: tuple[MetricSet, ...]


def citl(y: np.ndarray, lp: np.ndarray) -> tuple[float, bool]:
    """Calibration-in-the-large: intercept of a logistic fit with lp as offset.

    A constant outcome makes the intercept undefined; that case is
    reported as (nan, False) rather than raised, so flagged rows survive
    into the results.
    """
    y = np.asarray(y, dtype=float)
    lp = np.asarray(lp, dtype=float)
    if len(y) != len(lp):
        raise ValueError("y and lp must have the same length")
    if y.min() == y.max():
        return float("nan"), False
    fit = fit_logistic(np.ones((len(y), 1)), y, offset=lp, labels=("intercept",))
    return float(fit.coefficients[0]), fit.converged


def calibration_slope(y: np.ndarray, lp: np.ndarray) -> tuple[float, bool]:
    """Slope of a logistic recalibration fit of y on (intercept, lp)."""
    y = np.asarray(y, dtype=float)
    lp = np.asarray(lp, dtype=float)
    if len(y) != len(lp):
        raise ValueError("y and lp must have the same length")
    if y.min() == y.max() or lp.min() == lp.max():
        return float("nan"), False
    design = np.column_stack([np.ones(len(lp)), lp])
    fit = fit_logistic(design, y, labels=("intercept", "lp"))
    return float(fit.coefficients[1]), fit.converged


def c_statistic(y: np.ndarray, p: np.ndarray) -> float:
    """Concordance probability, ties counted one half.

    Rank based (Mann-Whitney), O(n log n).
    """
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    if len(y) != len(p):
        raise ValueError("y and p must have the same length")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateOutcomeError("C-statistic needs both outcome classes")
    ranks = rankdata(p)
    u = float(ranks[y == 1].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def brier(y: np.ndarray, p: np.ndarray) -> float:
    """Mean squared difference between predicted probability and outcome."""
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    if len(y) != len(p):
        raise ValueError("y and p must have the same length")
    return float(np.mean((p - y) ** 2))


def evaluate_predictions(y: np.ndarray, p: np.ndarray) -> MetricSet:
    """All four metrics from clipped probabilities; lp = logit(p)."""
    lp = logit(p)
    citl_value, citl_ok = citl(y, lp)
    slope_value, slope_ok = calibration_slope(y, lp)
    return MetricSet(
        citl=citl_value,
        slope=slope_value,
        cstat=c_statistic(y, p),
        brier=brier(y, p),
        citl_converged=citl_ok,
        slope_converged=slope_ok,
    )


def pool_metric_sets(metric_sets: Sequence[MetricSet]) -> MetricSet:
    """Componentwise mean of per-imputation metrics (pooled performance)."""
    if not metric_sets:
        raise ValueError("need at least one metric set")
    return MetricSet(
        citl=float(np.mean([ms.citl for ms in metric_sets])),
        slope=float(np.mean([ms.slope for ms in metric_sets])),
        cstat=float(np.mean([ms.cstat for ms in metric_sets])),
        brier=float(np.mean([ms.brier for ms in metric_sets])),
        citl_converged=all(ms.citl_converged for ms in metric_sets),
        slope_converged=all(ms.slope_converged for ms in metric_sets),
    )


def _check_compatible(method: str, strategy: StrategySpec, spec: CpmSpec) -> None:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
    if (method == "complete") != (strategy.tag == "DA+VA"):
        raise IncompatibleStrategyError(
            f"method {method!r} is incompatible with strategy {strategy.tag!r}: "
            "the complete-data method pairs exactly with DA+VA"
        )
    if strategy.tag == "DA+VA" and spec.variant != "base":
        raise IncompatibleStrategyError(
            "DA+VA fits the base variant only: the indicator column would be "
            "constant on data without induced missingness"
        )


def _develop(
    dev: Cohort,
    method: str,
    strategy: StrategySpec,
    spec: CpmSpec,
    m: int,
    rng: np.random.Generator,
) -> PooledCpm:
    if strategy.tag == "DA+VA":
        datasets: list[CompletedData] = [completed_from_truth(dev)]
    elif method == "RI":
        model = fit_imputation_model(dev, include_outcome=strategy.dev_uses_outcome)
        datasets = [impute_deterministic(dev, model)]
    else:
        datasets = impute_multiple(dev, strategy.dev_uses_outcome, m, rng)
    return fit_cpm(datasets, spec)


def _validation_sets(
    val: Cohort,
    method: str,
    strategy: StrategySpec,
    m: int,
    rng: np.random.Generator,
) -> tuple[list[CompletedData], bool]:
    """Completed validation data plus whether indicators are forced to zero."""
    if strategy.val_mode == VAL_COMPLETE:
        return [completed_from_truth(val)], True
    include_y = strategy.val_mode == VAL_WITH_Y
    if method == "RI":
        model = fit_imputation_model(val, include_outcome=include_y)
        return [impute_deterministic(val, model)], False
    return impute_multiple(val, include_y, m, rng), False


def run_strategy(
    dev: Cohort,
    val: Cohort,
    method: str,
    strategy: StrategySpec,
    spec: CpmSpec,
    rng: np.random.Generator,
    m: int = 20,
) -> StrategyResult:
    """Develop on ``dev`` and validate on ``val`` under one strategy.

    Development either uses the pre-missingness data (DA+VA) or imputes
    ``dev`` by the chosen method, with the outcome included per the
    strategy, then fits and pools the CPM variant. Validation completes
    ``val`` per the strategy (refitting the imputation model on ``val``
    itself), scores each completed copy, and pools the metrics; on
    complete-data validation the indicator columns are forced to zero.
    """
    _check_compatible(method, strategy, spec)
    pooled = _develop(dev, method, strategy, spec, m, rng)
    val_sets, force_zero = _validation_sets(val, method, strategy, m, rng)
    per_imputation = []
    for data in val_sets:
        design = build_design(data, spec, force_indicator_zero=force_zero)
        p = predict_probabilities(pooled.coefficients, design)
        per_imputation.append(evaluate_predictions(data.y, p))
    return StrategyResult(
        metrics=pool_metric_sets(per_imputation),
        coefficients=pooled,
        per_imputation_metrics=tuple(per_imputation),
    )
