"""Simulation engine for missing-data handling in clinical prediction models.

Generates cohorts under MCAR, MAR and MNAR missingness, develops logistic
prediction models with regression or multiple imputation and optional
missing indicators, validates them under six development/validation
strategies, and reports calibration and discrimination metrics across a
reproducible simulation grid.
"""

from .datagen import (
    CalibrationError,
    Cohort,
    ParameterConfig,
    calibrate_intercept,
    generate_cohort,
    generate_outcomes,
    induce_missingness,
    sample_predictors,
    split_cohort,
)
from .glm import (
    LinearFit,
    LogisticFit,
    SingularDesignError,
    draw_imputation_parameters,
    fit_linear,
    fit_logistic,
    predict_probabilities,
)
from .imputation import (
    CompletedData,
    ImputationModel,
    TooFewCompleteCasesError,
    completed_from_truth,
    fit_imputation_model,
    impute_deterministic,
    impute_multiple,
)
from .cpm import (
    CompleteDataRequiredError,
    CpmSpec,
    OutcomeInImputationError,
    PartialRecord,
    PooledCpm,
    VariantInapplicableError,
    build_design,
    fit_cpm,
    pool_logistic_fits,
    predict_single,
)
from .evaluation import (
    DegenerateOutcomeError,
    IncompatibleStrategyError,
    MetricSet,
    StrategyResult,
    StrategySpec,
    brier,
    c_statistic,
    calibration_slope,
    citl,
    evaluate_predictions,
    pool_metric_sets,
    run_strategy,
)
from .harness import (
    ExperimentOptions,
    RunRecord,
    classify_mechanism,
    enumerate_grid,
    run_experiment,
    run_iteration,
    select_configs,
    summarize,
)
from .artifact import read_model_artifact, write_model_artifact

__version__ = "0.1.0"
