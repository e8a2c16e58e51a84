"""Cohort generation for the missing-data simulation.

A cohort is built in three steps: correlated standard-normal predictors,
a binary outcome from a logistic model whose intercept is calibrated
empirically to the target prevalence, and a missingness indicator for
the first predictor from a second logistic model calibrated the same
way. The true predictor values are always retained; masking is realised
only through the ``x1_observed`` view.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import expit

__all__ = [
    "CalibrationError",
    "ParameterConfig",
    "Cohort",
    "sample_predictors",
    "calibrate_intercept",
    "generate_outcomes",
    "induce_missingness",
    "generate_cohort",
    "split_cohort",
]

CALIBRATION_BRACKET = (-50.0, 50.0)
CALIBRATION_TOL = 1e-10


class CalibrationError(ValueError):
    """The target proportion cannot be reached inside the intercept bracket."""

    def __init__(self, target: float, achievable: tuple[float, float]):
        self.target = target
        self.achievable = achievable
        super().__init__(
            f"target proportion {target} is outside the achievable range "
            f"[{achievable[0]:.3g}, {achievable[1]:.3g}] for intercepts in "
            f"[{CALIBRATION_BRACKET[0]}, {CALIBRATION_BRACKET[1]}]"
        )


@dataclass(frozen=True)
class ParameterConfig:
    """One cell of the simulation grid.

    ``beta_*`` are the log-odds coefficients of the missingness model,
    ``gamma_*`` those of the outcome model. Intercepts are not stored;
    they are calibrated per generated dataset and recorded on the Cohort.
    """

    beta_x1: float
    beta_x2: float
    beta_y: float
    gamma_x1: float
    gamma_x2: float
    gamma_x1x2: float
    pi_r1: float
    pi_y: float = 0.1
    rho: float = 0.4
    n_total: int = 10000
    split_fraction: float = 0.5

    def __post_init__(self):
        for name in ("pi_y", "pi_r1", "split_fraction"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie strictly inside (0, 1), got {value}")
        if not abs(self.rho) < 1.0:
            raise ValueError(f"rho must lie strictly inside (-1, 1), got {self.rho}")
        if self.n_total < 1:
            raise ValueError(f"n_total must be positive, got {self.n_total}")

    def with_n_total(self, n_total: int) -> "ParameterConfig":
        return replace(self, n_total=n_total)


@dataclass(frozen=True)
class Cohort:
    """A generated dataset with its calibrated intercepts.

    ``x1_observed`` equals ``x1`` where ``r1 == 0`` and is NaN where the
    value is missing (``r1 == 1``).
    """

    x1: np.ndarray
    x2: np.ndarray
    y: np.ndarray
    r1: np.ndarray
    x1_observed: np.ndarray
    gamma0_used: float
    beta0_used: float

    def __post_init__(self):
        n = len(self.x1)
        for name in ("x2", "y", "r1", "x1_observed"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from x1 length {n}")
        for name in ("y", "r1"):
            if not np.isin(getattr(self, name), (0.0, 1.0)).all():
                raise ValueError(f"{name} must contain only 0/1")
        missing = np.isnan(self.x1_observed)
        if not np.array_equal(missing, self.r1 == 1):
            raise ValueError("x1_observed must be absent exactly where r1 = 1")
        if not np.array_equal(self.x1_observed[~missing], self.x1[~missing]):
            raise ValueError("x1_observed must equal x1 where r1 = 0")

    @property
    def n(self) -> int:
        return len(self.x1)

    def subset(self, indices: np.ndarray) -> "Cohort":
        """Row subset sharing this cohort's calibrated intercepts."""
        return Cohort(
            x1=self.x1[indices],
            x2=self.x2[indices],
            y=self.y[indices],
            r1=self.r1[indices],
            x1_observed=self.x1_observed[indices],
            gamma0_used=self.gamma0_used,
            beta0_used=self.beta0_used,
        )


def sample_predictors(
    n: int, rho: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n pairs from a standard bivariate normal with correlation rho.

    Uses the closed-form 2x2 Cholesky construction
    x1 = z1, x2 = rho z1 + sqrt(1 - rho^2) z2.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not abs(rho) < 1.0:
        raise ValueError(f"rho must lie strictly inside (-1, 1), got {rho}")
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    x1 = z1
    x2 = rho * z1 + np.sqrt(1.0 - rho * rho) * z2
    return x1, x2


def calibrate_intercept(
    eta: np.ndarray,
    target: float,
    bracket: tuple[float, float] = CALIBRATION_BRACKET,
    tol: float = CALIBRATION_TOL,
) -> float:
    """Find c with mean(expit(c + eta)) = target by bisection.

    The map c -> mean(expit(c + eta)) is strictly increasing, so bisection
    over the bracket converges whenever the target is achievable; an
    unreachable target raises CalibrationError rather than clamping.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.size == 0:
        raise ValueError("eta must be non-empty")
    if not 0.0 < target < 1.0:
        raise ValueError(f"target must lie strictly inside (0, 1), got {target}")
    lo, hi = bracket

    def achieved(c: float) -> float:
        return float(np.mean(expit(c + eta)))

    f_lo, f_hi = achieved(lo), achieved(hi)
    if target < f_lo or target > f_hi:
        raise CalibrationError(target, (f_lo, f_hi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = achieved(mid)
        if abs(f_mid - target) <= tol:
            return mid
        if f_mid < target:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(target, (f_lo, f_hi))


def generate_outcomes(
    x1: np.ndarray,
    x2: np.ndarray,
    config: ParameterConfig,
    rng: np.random.Generator,
    gamma0: Optional[float] = None,
) -> tuple[np.ndarray, float]:
    """Draw the binary outcome with prevalence calibrated to pi_y.

    The linear predictor is gamma_x1 x1 + gamma_x2 x2 + gamma_x1x2 x1 x2.
    Pass a precomputed ``gamma0`` to skip per-dataset calibration (the
    calibrate-once-per-configuration alternative).
    """
    if len(x1) != len(x2):
        raise ValueError("x1 and x2 must have the same length")
    eta = config.gamma_x1 * x1 + config.gamma_x2 * x2 + config.gamma_x1x2 * x1 * x2
    if gamma0 is None:
        gamma0 = calibrate_intercept(eta, config.pi_y)
    y = (rng.random(len(eta)) < expit(gamma0 + eta)).astype(float)
    return y, gamma0


def induce_missingness(
    x1: np.ndarray,
    x2: np.ndarray,
    y: np.ndarray,
    config: ParameterConfig,
    rng: np.random.Generator,
    beta0: Optional[float] = None,
) -> tuple[np.ndarray, float]:
    """Draw the missingness indicator with rate calibrated to pi_r1.

    The linear predictor is beta_x1 x1 + beta_x2 x2 + beta_y y, so the
    indicator may depend on the (later masked) predictor and the outcome.
    The x1 values themselves are never altered here.
    """
    if not (len(x1) == len(x2) == len(y)):
        raise ValueError("x1, x2 and y must have the same length")
    eta = config.beta_x1 * x1 + config.beta_x2 * x2 + config.beta_y * y
    if beta0 is None:
        beta0 = calibrate_intercept(eta, config.pi_r1)
    r1 = (rng.random(len(eta)) < expit(beta0 + eta)).astype(float)
    return r1, beta0


def generate_cohort(
    config: ParameterConfig,
    rng: np.random.Generator,
    intercepts: Optional[tuple[float, float]] = None,
) -> Cohort:
    """Generate a full cohort of ``config.n_total`` records.

    ``intercepts=(gamma0, beta0)`` bypasses per-dataset calibration and is
    recorded on the cohort as-is.
    """
    gamma0, beta0 = intercepts if intercepts is not None else (None, None)
    x1, x2 = sample_predictors(config.n_total, config.rho, rng)
    y, gamma0 = generate_outcomes(x1, x2, config, rng, gamma0=gamma0)
    r1, beta0 = induce_missingness(x1, x2, y, config, rng, beta0=beta0)
    x1_observed = np.where(r1 == 1, np.nan, x1)
    return Cohort(
        x1=x1,
        x2=x2,
        y=y,
        r1=r1,
        x1_observed=x1_observed,
        gamma0_used=gamma0,
        beta0_used=beta0,
    )


def split_cohort(
    cohort: Cohort, fraction: float, rng: np.random.Generator
) -> tuple[Cohort, Cohort]:
    """Random partition into development and validation parts.

    Development receives floor(n * fraction) rows and validation the
    remainder; the two parts are disjoint and together exhaust the input.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie strictly inside (0, 1), got {fraction}")
    perm = rng.permutation(cohort.n)
    k = int(np.floor(cohort.n * fraction))
    return cohort.subset(perm[:k]), cohort.subset(perm[k:])
