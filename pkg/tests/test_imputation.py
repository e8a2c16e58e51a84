import numpy as np
import pytest

from cpmsim.datagen import Cohort, ParameterConfig, generate_cohort
from cpmsim.imputation import (
    ROSTER_WITH_OUTCOME,
    ROSTER_WITHOUT_OUTCOME,
    CompletedData,
    ImputationModel,
    TooFewCompleteCasesError,
    completed_from_truth,
    fit_imputation_model,
    impute_deterministic,
    impute_multiple,
)


def make_cohort(x1, x2, y, r1):
    x1 = np.asarray(x1, dtype=float)
    r1 = np.asarray(r1, dtype=float)
    return Cohort(
        x1=x1,
        x2=np.asarray(x2, dtype=float),
        y=np.asarray(y, dtype=float),
        r1=r1,
        x1_observed=np.where(r1 == 1, np.nan, x1),
        gamma0_used=0.0,
        beta0_used=0.0,
    )


def mar_config(n_total=10000):
    return ParameterConfig(
        beta_x1=0.0, beta_x2=1.0, beta_y=0.0,
        gamma_x1=0.7, gamma_x2=0.7, gamma_x1x2=0.1,
        pi_r1=0.5, n_total=n_total,
    )


class TestFitImputationModel:
    def test_identity_relation(self):
        x2 = np.linspace(-2, 2, 40)
        cohort = make_cohort(x1=x2, x2=x2, y=np.tile([0.0, 1.0], 20), r1=np.zeros(40))
        model = fit_imputation_model(cohort, include_outcome=False)
        assert model.inner.coefficients == pytest.approx([0.0, 1.0], abs=1e-10)
        assert model.inner.residual_variance <= 1e-20
        assert not model.uses_outcome

    def test_roster_with_outcome(self):
        rng = np.random.default_rng(200)
        cohort = generate_cohort(mar_config(n_total=500), rng)
        model = fit_imputation_model(cohort, include_outcome=True)
        assert model.inner.predictor_roster == ROSTER_WITH_OUTCOME
        assert model.uses_outcome

    def test_complete_cases_only(self):
        # corrupting the missing x1 values must not change the fit
        rng = np.random.default_rng(201)
        cohort = generate_cohort(mar_config(n_total=2000), rng)
        model = fit_imputation_model(cohort, include_outcome=False)
        corrupted = Cohort(
            x1=np.where(cohort.r1 == 1, 1e6, cohort.x1),
            x2=cohort.x2,
            y=cohort.y,
            r1=cohort.r1,
            x1_observed=cohort.x1_observed,
            gamma0_used=cohort.gamma0_used,
            beta0_used=cohort.beta0_used,
        )
        refit = fit_imputation_model(corrupted, include_outcome=False)
        assert np.array_equal(model.inner.coefficients, refit.inner.coefficients)

    def test_mar_slope_matches_independent_replication(self):
        # under MAR the complete-case slope is not the population 0.4;
        # the oracle is a second, independently generated cohort
        config = mar_config(n_total=1_000_000)
        fit_a = fit_imputation_model(
            generate_cohort(config, np.random.default_rng(202)), include_outcome=False
        ).inner
        fit_b = fit_imputation_model(
            generate_cohort(config, np.random.default_rng(203)), include_outcome=False
        ).inner
        se_a = np.sqrt(fit_a.residual_variance * fit_a.gram_inverse[1, 1])
        se_b = np.sqrt(fit_b.residual_variance * fit_b.gram_inverse[1, 1])
        combined = np.hypot(se_a, se_b)
        assert abs(fit_a.coefficients[1] - fit_b.coefficients[1]) <= 3 * combined

    def test_too_few_complete_cases(self):
        cohort = make_cohort(
            x1=[1.0, 2.0, 3.0, 4.0, 5.0],
            x2=[0.0, 1.0, 2.0, 3.0, 4.0],
            y=[0.0, 1.0, 0.0, 1.0, 0.0],
            r1=[0.0, 0.0, 1.0, 1.0, 1.0],
        )
        with pytest.raises(TooFewCompleteCasesError) as info:
            fit_imputation_model(cohort, include_outcome=True)
        assert info.value.n_complete == 2
        assert info.value.n_required == 4

    def test_roster_mismatch_rejected(self):
        cohort = make_cohort(
            x1=np.arange(10.0), x2=np.arange(10.0),
            y=np.tile([0.0, 1.0], 5), r1=np.zeros(10),
        )
        inner = fit_imputation_model(cohort, include_outcome=False).inner
        with pytest.raises(ValueError, match="roster"):
            ImputationModel(inner=inner, uses_outcome=True)


class TestImputeDeterministic:
    def test_no_missing_is_identity(self):
        rng = np.random.default_rng(204)
        x1 = rng.standard_normal(50)
        x2 = rng.standard_normal(50)
        cohort = make_cohort(x1, x2, np.tile([0.0, 1.0], 25), np.zeros(50))
        model = fit_imputation_model(cohort, include_outcome=False)
        completed = impute_deterministic(cohort, model)
        assert np.array_equal(completed.x1_completed, x1)
        assert completed.provenance == "regression-imputed"

    def test_linear_evaluation(self):
        x2 = np.linspace(-1, 3, 30)
        cohort = make_cohort(x2.copy(), x2, np.tile([0.0, 1.0], 15), np.zeros(30))
        model = fit_imputation_model(cohort, include_outcome=False)  # slope 1, intercept 0
        target = make_cohort(
            x1=[0.0, 0.0], x2=[1.5, -0.5], y=[0.0, 1.0], r1=[1.0, 1.0],
        )
        completed = impute_deterministic(target, model)
        assert completed.x1_completed == pytest.approx([1.5, -0.5], abs=1e-10)
        assert completed.x1x2 == pytest.approx([2.25, 0.25], abs=1e-10)

    def test_repeatable(self):
        rng = np.random.default_rng(205)
        cohort = generate_cohort(mar_config(n_total=2000), rng)
        model = fit_imputation_model(cohort, include_outcome=True)
        first = impute_deterministic(cohort, model)
        second = impute_deterministic(cohort, model)
        assert np.array_equal(first.x1_completed, second.x1_completed)
        assert np.array_equal(first.x1x2, second.x1x2)


class TestImputeMultiple:
    def test_count_and_completeness(self):
        rng = np.random.default_rng(206)
        cohort = generate_cohort(mar_config(n_total=2000), rng)
        completions = impute_multiple(cohort, True, 20, np.random.default_rng(207))
        assert len(completions) == 20
        for completed in completions:
            assert not np.isnan(completed.x1_completed).any()
            assert np.array_equal(completed.x1x2, completed.x1_completed * completed.x2)

    def test_degenerate_no_missing(self):
        x2 = np.linspace(-2, 2, 30)
        cohort = make_cohort(x2.copy(), x2, np.tile([0.0, 1.0], 15), np.zeros(30))
        completions = impute_multiple(cohort, False, 5, np.random.default_rng(208))
        assert len(completions) == 5
        for completed in completions:
            assert np.array_equal(completed.x1_completed, cohort.x1)

    def test_posterior_predictive_moments(self):
        # one missing record behind a million complete cases: the spread of
        # its imputations is essentially the residual distribution
        n = 1_000_001
        rng = np.random.default_rng(209)
        x2 = rng.standard_normal(n)
        x1 = 0.4 * x2 + np.sqrt(1 - 0.16) * rng.standard_normal(n)
        r1 = np.zeros(n)
        r1[-1] = 1.0
        cohort = make_cohort(x1, x2, np.tile([0.0, 1.0], (n + 1) // 2)[:n], r1)
        model = fit_imputation_model(cohort, include_outcome=False)
        point = impute_deterministic(cohort, model).x1_completed[-1]

        m = 200
        draws = np.array([
            completed.x1_completed[-1]
            for completed in impute_multiple(cohort, False, m, np.random.default_rng(216))
        ])
        mc_se = draws.std(ddof=1) / np.sqrt(m)
        assert abs(draws.mean() - point) <= 3 * mc_se
        assert abs(draws.var(ddof=1) / model.inner.residual_variance - 1.0) <= 0.10

    def test_observed_values_preserved_bit_exactly(self):
        rng = np.random.default_rng(211)
        cohort = generate_cohort(mar_config(n_total=3000), rng)
        observed = cohort.r1 == 0
        for completed in impute_multiple(cohort, True, 6, np.random.default_rng(212)):
            assert np.array_equal(
                completed.x1_completed[observed], cohort.x1_observed[observed]
            )

    def test_distinct_streams_differ(self):
        rng = np.random.default_rng(213)
        cohort = generate_cohort(mar_config(n_total=1000), rng)
        first = impute_multiple(cohort, False, 1, np.random.default_rng(1))[0]
        second = impute_multiple(cohort, False, 1, np.random.default_rng(2))[0]
        missing = cohort.r1 == 1
        assert not np.array_equal(first.x1_completed[missing], second.x1_completed[missing])

    def test_rejects_nonpositive_m(self):
        rng = np.random.default_rng(214)
        cohort = generate_cohort(mar_config(n_total=100), rng)
        with pytest.raises(ValueError, match="m must be"):
            impute_multiple(cohort, False, 0, np.random.default_rng(0))


class TestCompletedData:
    def test_from_truth(self):
        rng = np.random.default_rng(215)
        cohort = generate_cohort(mar_config(n_total=300), rng)
        completed = completed_from_truth(cohort)
        assert completed.provenance == "original-complete"
        assert np.array_equal(completed.x1_completed, cohort.x1)
        assert np.array_equal(completed.x1x2, cohort.x1 * cohort.x2)

    def test_rejects_inconsistent_interaction(self):
        with pytest.raises(ValueError, match="x1x2"):
            CompletedData(
                x1_completed=np.ones(3),
                x2=np.ones(3),
                y=np.zeros(3),
                r1=np.zeros(3),
                x1x2=np.full(3, 2.0),
                provenance="regression-imputed",
            )

    def test_rejects_absent_values(self):
        with pytest.raises(ValueError, match="absent"):
            CompletedData(
                x1_completed=np.array([1.0, np.nan]),
                x2=np.ones(2),
                y=np.zeros(2),
                r1=np.zeros(2),
                x1x2=np.array([1.0, np.nan]),
                provenance="regression-imputed",
            )
