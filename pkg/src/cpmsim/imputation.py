"""Imputation of the incomplete predictor.

Both methods share one linear imputation model for x1, fitted on the
complete cases of a cohort: deterministic regression imputation fills in
point predictions once, multiple imputation draws model parameters from
their posterior and adds residual noise for each of m completed copies.
The x1 * x2 interaction is always recomputed from the completed x1
(passive handling), never imputed on its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import Cohort
from .glm import LinearFit, draw_imputation_parameters, fit_linear

__all__ = [
    "ROSTER_WITHOUT_OUTCOME",
    "ROSTER_WITH_OUTCOME",
    "TooFewCompleteCasesError",
    "ImputationModel",
    "CompletedData",
    "completed_from_truth",
    "fit_imputation_model",
    "impute_deterministic",
    "impute_multiple",
]

ROSTER_WITHOUT_OUTCOME = ("intercept", "x2")
ROSTER_WITH_OUTCOME = ("intercept", "x2", "y")

PROVENANCE_COMPLETE = "original-complete"
PROVENANCE_RI = "regression-imputed"


class TooFewCompleteCasesError(ValueError):
    """Not enough complete cases to fit the imputation model."""

    def __init__(self, n_complete: int, n_required: int):
        self.n_complete = n_complete
        self.n_required = n_required
        super().__init__(
            f"imputation model needs at least {n_required} complete cases, "
            f"found {n_complete}"
        )


@dataclass(frozen=True)
class ImputationModel:
    """Linear model for x1 on (intercept, x2) or (intercept, x2, y)."""

    inner: LinearFit
    uses_outcome: bool

    def __post_init__(self):
        expected = ROSTER_WITH_OUTCOME if self.uses_outcome else ROSTER_WITHOUT_OUTCOME
        if self.inner.predictor_roster != expected:
            raise ValueError(
                f"imputation roster {self.inner.predictor_roster} does not match "
                f"uses_outcome={self.uses_outcome} (expected {expected})"
            )


@dataclass(frozen=True)
class CompletedData:
    """A dataset with no absent values and a passively recomputed interaction."""

    x1_completed: np.ndarray
    x2: np.ndarray
    y: np.ndarray
    r1: np.ndarray
    x1x2: np.ndarray
    provenance: str

    def __post_init__(self):
        n = len(self.x1_completed)
        for name in ("x2", "y", "r1", "x1x2"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from x1_completed length {n}")
        for name in ("x1_completed", "x2", "x1x2"):
            if np.isnan(getattr(self, name)).any():
                raise ValueError(f"{name} contains absent values")
        if not np.array_equal(self.x1x2, self.x1_completed * self.x2):
            raise ValueError("x1x2 must equal x1_completed * x2 elementwise")

    @property
    def n(self) -> int:
        return len(self.x1_completed)


def completed_from_truth(cohort: Cohort) -> CompletedData:
    """View a cohort as complete data, using the true x1 everywhere."""
    return CompletedData(
        x1_completed=cohort.x1,
        x2=cohort.x2,
        y=cohort.y,
        r1=cohort.r1,
        x1x2=cohort.x1 * cohort.x2,
        provenance=PROVENANCE_COMPLETE,
    )


def _imputation_design(cohort: Cohort, rows: np.ndarray, include_outcome: bool) -> np.ndarray:
    cols = [np.ones(int(rows.sum())), cohort.x2[rows]]
    if include_outcome:
        cols.append(cohort.y[rows])
    return np.column_stack(cols)


def fit_imputation_model(cohort: Cohort, include_outcome: bool) -> ImputationModel:
    """OLS of x1 on the intercept, x2 and optionally y, complete cases only."""
    observed = cohort.r1 == 0
    roster = ROSTER_WITH_OUTCOME if include_outcome else ROSTER_WITHOUT_OUTCOME
    n_complete = int(observed.sum())
    if n_complete < len(roster) + 1:
        raise TooFewCompleteCasesError(n_complete, len(roster) + 1)
    design = _imputation_design(cohort, observed, include_outcome)
    fit = fit_linear(design, cohort.x1_observed[observed], labels=roster)
    return ImputationModel(inner=fit, uses_outcome=include_outcome)


def _completed(cohort: Cohort, x1_completed: np.ndarray, provenance: str) -> CompletedData:
    return CompletedData(
        x1_completed=x1_completed,
        x2=cohort.x2,
        y=cohort.y,
        r1=cohort.r1,
        x1x2=x1_completed * cohort.x2,
        provenance=provenance,
    )


def impute_deterministic(cohort: Cohort, model: ImputationModel) -> CompletedData:
    """Fill missing x1 with the model's point predictions.

    Observed values are carried over untouched, so the result is a
    deterministic function of (cohort, model).
    """
    missing = cohort.r1 == 1
    x1_completed = cohort.x1_observed.copy()
    if missing.any():
        design = _imputation_design(cohort, missing, model.uses_outcome)
        x1_completed[missing] = model.inner.predict(design)
    return _completed(cohort, x1_completed, PROVENANCE_RI)


def impute_multiple(
    cohort: Cohort,
    include_outcome: bool,
    m: int,
    rng: np.random.Generator,
) -> list[CompletedData]:
    """Produce m stochastic completions of the cohort.

    The imputation model is fitted once on the complete cases; each
    completion draws fresh (sigma2*, beta*) from the posterior and fills
    missing x1 with design @ beta* plus Normal(0, sigma2*) noise.
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    model = fit_imputation_model(cohort, include_outcome)
    missing = cohort.r1 == 1
    n_missing = int(missing.sum())
    design = _imputation_design(cohort, missing, include_outcome)
    completions = []
    for k in range(1, m + 1):
        sigma2_star, beta_star = draw_imputation_parameters(model.inner, rng)
        x1_completed = cohort.x1_observed.copy()
        if n_missing:
            x1_completed[missing] = design @ beta_star + rng.normal(
                0.0, np.sqrt(sigma2_star), n_missing
            )
        completions.append(
            _completed(cohort, x1_completed, f"multiple-imputation draw {k} of {m}")
        )
    return completions
