"""Small dense regression kernels.

Ordinary least squares, posterior parameter draws for normal-model
imputation, and logistic regression fitted by iteratively reweighted
least squares (optionally with a fixed offset). Everything here is a
pure function of its inputs; random draws take an explicit generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit, logit

__all__ = [
    "PROB_CLIP",
    "SingularDesignError",
    "LinearFit",
    "LogisticFit",
    "fit_linear",
    "draw_imputation_parameters",
    "fit_logistic",
    "predict_probabilities",
    "bernoulli_loglik",
    "expit",
    "logit",
]

# Clipping bound applied to predicted probabilities so that downstream
# logits stay finite without materially changing Brier or rank metrics.
PROB_CLIP = 1e-10

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 50


class SingularDesignError(ValueError):
    """A design matrix is rank deficient."""

    def __init__(self, column: str):
        self.column = column
        super().__init__(
            f"design matrix is rank deficient: column {column!r} is "
            "linearly dependent on the preceding columns"
        )


def _default_labels(q: int) -> tuple[str, ...]:
    return tuple(f"x{j}" for j in range(q))


def _check_full_rank(design: np.ndarray, labels: Sequence[str]) -> None:
    """Raise SingularDesignError naming the first dependent column."""
    r = np.linalg.qr(design, mode="r")
    diag = np.abs(np.diag(r))
    tol = diag.max(initial=0.0) * max(design.shape) * np.finfo(float).eps
    bad = np.nonzero(diag <= tol)[0]
    if bad.size:
        raise SingularDesignError(labels[int(bad[0])])


@dataclass(frozen=True)
class LinearFit:
    """OLS fit: coefficients, residual variance and the Gram inverse.

    ``residual_variance`` is SSE / (n_obs - q) and ``gram_inverse`` is
    (X'X)^-1; together they carry everything a posterior parameter draw
    needs.
    """

    coefficients: np.ndarray
    residual_variance: float
    gram_inverse: np.ndarray
    n_obs: int
    predictor_roster: tuple[str, ...]

    def predict(self, design: np.ndarray) -> np.ndarray:
        return np.asarray(design, dtype=float) @ self.coefficients


@dataclass(frozen=True)
class LogisticFit:
    """Logistic MLE with convergence diagnostics.

    ``coefficient_covariance`` is the inverse observed information at the
    returned iterate. ``loglik_trace`` holds the log-likelihood after each
    IRLS step when the fit was run with ``track_loglik``, else None.
    """

    coefficients: np.ndarray
    converged: bool
    iterations_used: int
    coefficient_covariance: np.ndarray
    loglik_trace: Optional[np.ndarray] = field(default=None, repr=False)


def fit_linear(
    design: np.ndarray,
    response: np.ndarray,
    labels: Optional[Sequence[str]] = None,
) -> LinearFit:
    """Solve the normal equations for ``response`` on ``design``.

    Requires more rows than columns and a full-rank design; a dependent
    column is reported by name via SingularDesignError.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2:
        raise ValueError("design must be a 2-d matrix")
    n, q = X.shape
    if y.shape != (n,):
        raise ValueError(f"response length {y.shape} does not match {n} design rows")
    if n <= q:
        raise ValueError(f"need more observations than predictors (n={n}, q={q})")
    roster = tuple(labels) if labels is not None else _default_labels(q)
    if len(roster) != q:
        raise ValueError("labels length does not match design columns")
    _check_full_rank(X, roster)

    gram = X.T @ X
    factor = cho_factor(gram)
    beta = cho_solve(factor, X.T @ y)
    resid = y - X @ beta
    sse = float(resid @ resid)
    gram_inv = cho_solve(factor, np.eye(q))
    gram_inv = (gram_inv + gram_inv.T) / 2.0
    return LinearFit(
        coefficients=beta,
        residual_variance=sse / (n - q),
        gram_inverse=gram_inv,
        n_obs=n,
        predictor_roster=roster,
    )


def draw_imputation_parameters(
    fit: LinearFit, rng: np.random.Generator
) -> tuple[float, np.ndarray]:
    """Draw (sigma2*, beta*) from the noninformative normal-model posterior.

    sigma2* = SSE / g with g ~ chi-square(n_obs - q), then
    beta* ~ Normal(coefficients, sigma2* (X'X)^-1). A zero-residual fit
    degenerates to (0, coefficients) exactly.
    """
    df = fit.n_obs - len(fit.coefficients)
    if df <= 0:
        raise ValueError("posterior draw requires n_obs > number of predictors")
    sse = fit.residual_variance * df
    g = rng.chisquare(df)
    sigma2_star = sse / g
    scale = np.linalg.cholesky(fit.gram_inverse)
    beta_star = fit.coefficients + np.sqrt(sigma2_star) * (
        scale @ rng.standard_normal(len(fit.coefficients))
    )
    return sigma2_star, beta_star


def bernoulli_loglik(y: np.ndarray, eta: np.ndarray) -> float:
    """Bernoulli log-likelihood at linear predictor ``eta``."""
    return float(y @ eta - np.logaddexp(0.0, eta).sum())


def fit_logistic(
    design: np.ndarray,
    response: np.ndarray,
    offset: Optional[np.ndarray] = None,
    labels: Optional[Sequence[str]] = None,
    tol: float = IRLS_TOL,
    max_iter: int = IRLS_MAX_ITER,
    track_loglik: bool = False,
) -> LogisticFit:
    """Maximise the Bernoulli log-likelihood by IRLS.

    The linear predictor is ``design @ beta + offset``. Convergence is
    declared when the largest absolute coefficient change drops below
    ``tol``; after ``max_iter`` steps the last iterate is returned with
    ``converged=False`` rather than raising, so simulations survive
    separation. ``track_loglik`` records the log-likelihood after each
    step on ``loglik_trace``.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2:
        raise ValueError("design must be a 2-d matrix")
    n, q = X.shape
    if y.shape != (n,):
        raise ValueError("response length does not match design rows")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("response must be coded 0/1")
    offs = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
    if offs.shape != (n,):
        raise ValueError("offset length does not match design rows")
    roster = tuple(labels) if labels is not None else _default_labels(q)
    _check_full_rank(X, roster)

    beta = np.zeros(q)
    converged = False
    iterations = 0
    trace = [] if track_loglik else None
    for iterations in range(1, max_iter + 1):
        u = X @ beta
        p = expit(u + offs)
        w = np.maximum(p * (1.0 - p), 1e-12)
        # Weighted normal equations: X'WX beta = X'(W u + (y - p)).
        gram = X.T @ (X * w[:, None])
        rhs = X.T @ (w * u + (y - p))
        try:
            beta_new = cho_solve(cho_factor(gram), rhs)
        except np.linalg.LinAlgError:
            break
        delta = float(np.max(np.abs(beta_new - beta)))
        beta = beta_new
        if trace is not None:
            trace.append(bernoulli_loglik(y, X @ beta + offs))
        if delta < tol:
            converged = True
            break

    p = expit(X @ beta + offs)
    w = np.maximum(p * (1.0 - p), 1e-12)
    gram = X.T @ (X * w[:, None])
    try:
        cov = cho_solve(cho_factor(gram), np.eye(q))
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(gram)
    cov = (cov + cov.T) / 2.0
    return LogisticFit(
        coefficients=beta,
        converged=converged,
        iterations_used=iterations,
        coefficient_covariance=cov,
        loglik_trace=None if trace is None else np.asarray(trace),
    )


def predict_probabilities(
    coefficients: np.ndarray, design: np.ndarray, clip: bool = True
) -> np.ndarray:
    """expit(design @ coefficients), clipped to [PROB_CLIP, 1 - PROB_CLIP].

    Pass ``clip=False`` for the raw probabilities.
    """
    p = expit(np.asarray(design, dtype=float) @ np.asarray(coefficients, dtype=float))
    if clip:
        p = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    return p
