"""Clinical prediction model variants, pooling, and single-record prediction.

Three logistic model variants are supported: the base model on
(1, x1, x2, x1*x2), the same plus the missingness indicator r1, and
additionally the r1*x1 interaction. Fits across multiply imputed
datasets are pooled with Rubin's rules; a fitted model together with its
development imputation model can score one partially observed record at
deployment time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .glm import LogisticFit, fit_logistic, predict_probabilities
from .imputation import CompletedData, ImputationModel

__all__ = [
    "VARIANTS",
    "VariantInapplicableError",
    "CompleteDataRequiredError",
    "OutcomeInImputationError",
    "CpmSpec",
    "PooledCpm",
    "PartialRecord",
    "build_design",
    "fit_cpm",
    "pool_logistic_fits",
    "predict_single",
]

VARIANTS = ("base", "indicator", "indicator_interaction")

_ROSTERS = {
    "base": ("intercept", "x1", "x2", "x1x2"),
    "indicator": ("intercept", "x1", "x2", "x1x2", "r1"),
    "indicator_interaction": ("intercept", "x1", "x2", "x1x2", "r1", "r1x1"),
}


class VariantInapplicableError(ValueError):
    """An indicator variant cannot be fitted because r1 is constant."""


class CompleteDataRequiredError(ValueError):
    """Complete data is required at deployment but x1 is absent."""


class OutcomeInImputationError(ValueError):
    """The imputation model uses the outcome, which is unavailable at prediction."""


@dataclass(frozen=True)
class CpmSpec:
    """Which model variant to fit; fixes the design-column roster."""

    variant: str

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")

    @property
    def columns(self) -> tuple[str, ...]:
        return _ROSTERS[self.variant]

    @property
    def uses_indicator(self) -> bool:
        return self.variant != "base"


@dataclass(frozen=True)
class PooledCpm:
    """Logistic coefficients pooled across imputations by Rubin's rules.

    The point estimate is the per-coefficient mean across fits;
    total_variance = within + (1 + 1/m) * between. For a single fit
    (m = 1) the between component is identically zero.
    """

    coefficients: np.ndarray
    within_variance: np.ndarray
    between_variance: np.ndarray
    total_variance: np.ndarray
    m: int
    any_nonconverged: bool
    roster: tuple[str, ...]


@dataclass(frozen=True)
class PartialRecord:
    """One record at prediction time: x2 is required, x1 may be absent."""

    x2: float
    x1: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.x2):
            raise ValueError(f"x2 must be finite, got {self.x2}")
        if self.x1 is not None and not np.isfinite(self.x1):
            raise ValueError(f"x1 must be finite or absent, got {self.x1}")


def build_design(
    data: CompletedData, spec: CpmSpec, force_indicator_zero: bool = False
) -> np.ndarray:
    """Assemble the design matrix for a variant, in roster order.

    With ``force_indicator_zero`` the r1 and r1*x1 columns are identically
    zero, matching deployment on fully observed data where no record is
    flagged missing.
    """
    n = data.n
    if force_indicator_zero:
        r1 = np.zeros(n)
        r1x1 = np.zeros(n)
    else:
        r1 = data.r1.astype(float)
        r1x1 = r1 * data.x1_completed
    columns = {
        "intercept": np.ones(n),
        "x1": data.x1_completed,
        "x2": data.x2,
        "x1x2": data.x1x2,
        "r1": r1,
        "r1x1": r1x1,
    }
    return np.column_stack([columns[name] for name in spec.columns])


def pool_logistic_fits(
    fits: Sequence[LogisticFit], roster: Sequence[str]
) -> PooledCpm:
    """Apply Rubin's rules to a list of logistic fits sharing one roster."""
    if not fits:
        raise ValueError("need at least one fit to pool")
    m = len(fits)
    coefs = np.vstack([fit.coefficients for fit in fits])
    within = np.vstack([np.diag(fit.coefficient_covariance) for fit in fits]).mean(axis=0)
    if m > 1:
        between = coefs.var(axis=0, ddof=1)
    else:
        between = np.zeros(coefs.shape[1])
    return PooledCpm(
        coefficients=coefs.mean(axis=0),
        within_variance=within,
        between_variance=between,
        total_variance=within + (1.0 + 1.0 / m) * between,
        m=m,
        any_nonconverged=any(not fit.converged for fit in fits),
        roster=tuple(roster),
    )


def fit_cpm(datasets: Sequence[CompletedData], spec: CpmSpec) -> PooledCpm:
    """Fit the variant to each completed dataset and pool the coefficients.

    Indicator variants require a non-constant r1 column; on data that was
    never subject to missingness they are reported as inapplicable
    instead of being fitted with a degenerate design.
    """
    if not datasets:
        raise ValueError("need at least one completed dataset")
    first = datasets[0]
    for data in datasets[1:]:
        if data.n != first.n or not np.array_equal(data.y, first.y):
            raise ValueError("all completed datasets must share n and y")
    if spec.uses_indicator:
        for data in datasets:
            if np.all(data.r1 == data.r1[0]):
                raise VariantInapplicableError(
                    f"variant {spec.variant!r} is inapplicable: r1 is constant "
                    f"({data.r1[0]:.0f} for every record)"
                )
    fits = [
        fit_logistic(build_design(data, spec), data.y, labels=spec.columns)
        for data in datasets
    ]
    return pool_logistic_fits(fits, spec.columns)


def _single_row_design(spec: CpmSpec, x1: float, x2: float, r1: float) -> np.ndarray:
    values = {
        "intercept": 1.0,
        "x1": x1,
        "x2": x2,
        "x1x2": x1 * x2,
        "r1": r1,
        "r1x1": r1 * x1,
    }
    return np.array([[values[name] for name in spec.columns]])


def predict_single(
    cpm: PooledCpm,
    spec: CpmSpec,
    imp: ImputationModel,
    record: PartialRecord,
    allow_missing: bool = False,
) -> float:
    """Predict the outcome probability for one record at deployment.

    An absent x1 is filled with the development imputation model's point
    prediction and the record is flagged via r1 = 1; this requires
    ``allow_missing`` and an imputation model that does not use the
    outcome, which is unknown at prediction time.
    """
    if record.x1 is None:
        if not allow_missing:
            raise CompleteDataRequiredError(
                "x1 is absent but complete data is required at deployment"
            )
        if imp.uses_outcome:
            raise OutcomeInImputationError(
                "cannot impute at prediction time with an imputation model "
                "that uses the outcome"
            )
        design = np.array([[1.0, record.x2]])
        x1 = float(imp.inner.predict(design)[0])
        r1 = 1.0
    else:
        x1 = record.x1
        r1 = 0.0
    row = _single_row_design(spec, x1, record.x2, r1)
    return float(predict_probabilities(cpm.coefficients, row)[0])
