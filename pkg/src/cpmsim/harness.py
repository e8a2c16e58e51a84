"""Experiment harness: grid enumeration, deterministic seeding, parallel
execution and CSV persistence.

The grid is the Cartesian product of the missingness coefficients
(three levels each), the outcome coefficients (two levels each), the
interaction coefficient (two levels) and the missingness proportion
(four levels): 864 configurations, identified by their enumeration
index. Each (config, iteration) task derives all of its random streams
from (master_seed, config_id, iteration) alone, so output is identical
for any worker count.
"""

from __future__ import annotations

import csv
import sys
import time
from dataclasses import dataclass, field, replace
from itertools import product
from multiprocessing import Pool
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .datagen import ParameterConfig, generate_cohort, split_cohort
from .cpm import CpmSpec, VARIANTS
from .evaluation import STRATEGY_TAGS, StrategyResult, StrategySpec, run_strategy

__all__ = [
    "MECHANISMS",
    "TRIPLES",
    "CSV_COLUMNS",
    "RunRecord",
    "ExperimentOptions",
    "enumerate_grid",
    "classify_mechanism",
    "select_configs",
    "run_iteration",
    "run_experiment",
    "summarize",
]

BETA_LEVELS = (0.0, 0.5, 1.0)
GAMMA_LEVELS = (0.5, 0.7)
GAMMA_INTERACTION_LEVELS = (0.0, 0.1)
PI_R1_LEVELS = (0.1, 0.25, 0.5, 0.75)

MECHANISMS = ("MCAR", "MAR", "MNAR-X", "MNAR-Y")

# Every (method, strategy, variant) combination run per iteration. The
# complete-data method pairs only with DA+VA and the base variant; the
# two imputation methods run all five remaining strategies and variants.
TRIPLES: tuple[tuple[str, str, str], ...] = (("complete", "DA+VA", "base"),) + tuple(
    (method, strategy, variant)
    for method in ("RI", "MI")
    for strategy in ("DY+VY", "DnoY+VnoY", "DY+VnoY", "DY+VA", "DnoY+VA")
    for variant in VARIANTS
)

COEF_COLUMNS = ("intercept", "x1", "x2", "x1x2", "r1", "r1x1")

CSV_COLUMNS = (
    "config_id",
    "iteration",
    "seed",
    "mechanism",
    "method",
    "strategy",
    "variant",
    "citl",
    "citl_converged",
    "slope",
    "slope_converged",
    "cstat",
    "brier",
    "coef_intercept",
    "coef_x1",
    "coef_x2",
    "coef_x1x2",
    "coef_r1",
    "coef_r1x1",
    "gamma0_used",
    "beta0_used",
    "error_tag",
)


def enumerate_grid() -> list[ParameterConfig]:
    """All 864 grid configurations in a fixed order; index = config_id."""
    return [
        ParameterConfig(
            beta_x1=b1,
            beta_x2=b2,
            beta_y=by,
            gamma_x1=g1,
            gamma_x2=g2,
            gamma_x1x2=g12,
            pi_r1=pi_r1,
        )
        for b1, b2, by in product(BETA_LEVELS, repeat=3)
        for g1 in GAMMA_LEVELS
        for g2 in GAMMA_LEVELS
        for g12 in GAMMA_INTERACTION_LEVELS
        for pi_r1 in PI_R1_LEVELS
    ]


def classify_mechanism(config: ParameterConfig) -> str:
    """Missingness mechanism label, in priority order beta_y, beta_x1, beta_x2."""
    if config.beta_y != 0:
        return "MNAR-Y"
    if config.beta_x1 != 0:
        return "MNAR-X"
    if config.beta_x2 != 0:
        return "MAR"
    return "MCAR"


@dataclass
class RunRecord:
    """One (config, iteration, method, strategy, variant) result row.

    Metric and coefficient fields are None on error rows (and coefficient
    fields are None whenever the column is not in the fitted roster);
    ``elapsed_seconds`` is diagnostic only and never serialized.
    """

    config_id: int
    iteration: int
    seed: int
    mechanism: str
    method: str
    strategy: str
    variant: str
    citl: Optional[float] = None
    citl_converged: Optional[bool] = None
    slope: Optional[float] = None
    slope_converged: Optional[bool] = None
    cstat: Optional[float] = None
    brier: Optional[float] = None
    coefficients: dict[str, float] = field(default_factory=dict)
    gamma0_used: Optional[float] = None
    beta0_used: Optional[float] = None
    error_tag: str = ""
    elapsed_seconds: float = 0.0

    def csv_row(self) -> list[str]:
        row = [
            str(self.config_id),
            str(self.iteration),
            str(self.seed),
            self.mechanism,
            self.method,
            self.strategy,
            self.variant,
            _fmt_float(self.citl),
            _fmt_bool(self.citl_converged),
            _fmt_float(self.slope),
            _fmt_bool(self.slope_converged),
            _fmt_float(self.cstat),
            _fmt_float(self.brier),
        ]
        row.extend(_fmt_float(self.coefficients.get(name)) for name in COEF_COLUMNS)
        row.append(_fmt_float(self.gamma0_used))
        row.append(_fmt_float(self.beta0_used))
        row.append(self.error_tag)
        return row


def _fmt_float(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _fmt_bool(value: Optional[bool]) -> str:
    return "" if value is None else str(int(value))


def _stream(master_seed: int, config_id: int, iteration: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(config_id, iteration, *key))
    return np.random.default_rng(seq)


def task_seed(master_seed: int, config_id: int, iteration: int) -> int:
    """The recorded per-task seed, a pure function of its three inputs."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(config_id, iteration))
    return int(seq.generate_state(1, np.uint64)[0])


def _record_from_result(
    base: RunRecord, result: StrategyResult, roster: Sequence[str]
) -> RunRecord:
    base.citl = result.metrics.citl
    base.citl_converged = result.metrics.citl_converged
    base.slope = result.metrics.slope
    base.slope_converged = result.metrics.slope_converged
    base.cstat = result.metrics.cstat
    base.brier = result.metrics.brier
    base.coefficients = {
        name: float(value)
        for name, value in zip(roster, result.coefficients.coefficients)
    }
    return base


def run_iteration(
    config: ParameterConfig,
    iteration: int,
    master_seed: int,
    config_id: int = 0,
    n_total: Optional[int] = None,
    m: int = 20,
    triples: Optional[Sequence[tuple[str, str, str]]] = None,
) -> list[RunRecord]:
    """Run one iteration of one configuration.

    Generates a cohort, splits it 50/50, and executes every requested
    (method, strategy, variant) triple (all 31 by default). A failing
    triple yields an error-tagged record; the iteration itself never
    aborts. Each triple draws from its own stream keyed by its position
    in the canonical triple list, so results do not depend on which other
    triples were requested.
    """
    cfg = replace(config, n_total=n_total) if n_total is not None else config
    seed = task_seed(master_seed, config_id, iteration)
    mechanism = classify_mechanism(cfg)
    cohort = generate_cohort(cfg, _stream(master_seed, config_id, iteration, 0))
    dev, val = split_cohort(
        cohort, cfg.split_fraction, _stream(master_seed, config_id, iteration, 1)
    )
    records = []
    for triple in triples if triples is not None else TRIPLES:
        method, strategy_tag, variant = triple
        triple_index = TRIPLES.index(tuple(triple))
        rng = _stream(master_seed, config_id, iteration, 2, triple_index)
        record = RunRecord(
            config_id=config_id,
            iteration=iteration,
            seed=seed,
            mechanism=mechanism,
            method=method,
            strategy=strategy_tag,
            variant=variant,
            gamma0_used=cohort.gamma0_used,
            beta0_used=cohort.beta0_used,
        )
        spec = CpmSpec(variant)
        started = time.perf_counter()
        try:
            result = run_strategy(dev, val, method, StrategySpec(strategy_tag), spec, rng, m=m)
            record = _record_from_result(record, result, spec.columns)
        except Exception as exc:  # noqa: BLE001 - error rows must not abort the run
            record.error_tag = f"{type(exc).__name__}: {exc}"
        record.elapsed_seconds = time.perf_counter() - started
        records.append(record)
    return records


@dataclass
class ExperimentOptions:
    """Options for a full simulation run."""

    master_seed: int
    out: Union[str, Path]
    iterations: int = 200
    configs: str = "all"
    n_total: Optional[int] = None
    m: int = 20
    workers: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be positive, got {self.iterations}")
        if self.m < 1:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")


def select_configs(selector: str) -> list[tuple[int, ParameterConfig]]:
    """Resolve a config selector against the grid.

    Accepts ``all``, a comma list of integer ids, or a comma list of
    ``key=value`` predicates over the grid parameters with the pseudo-key
    ``mechanism``. An empty selection is an error.
    """
    grid = enumerate_grid()
    selector = selector.strip()
    if selector == "all":
        return list(enumerate(grid))
    tokens = [tok.strip() for tok in selector.split(",") if tok.strip()]
    if not tokens:
        raise ValueError("empty config selector")
    if all("=" not in tok for tok in tokens):
        ids = sorted({int(tok) for tok in tokens})
        for config_id in ids:
            if not 0 <= config_id < len(grid):
                raise ValueError(f"config id {config_id} outside 0..{len(grid) - 1}")
        return [(config_id, grid[config_id]) for config_id in ids]
    predicates = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise ValueError(f"malformed selector token {tok!r}")
        predicates[key.strip()] = value.strip()
    selected = []
    for config_id, config in enumerate(grid):
        keep = True
        for key, value in predicates.items():
            if key == "mechanism":
                keep = classify_mechanism(config) == value
            elif hasattr(config, key):
                keep = getattr(config, key) == float(value)
            else:
                raise ValueError(f"unknown config field {key!r}")
            if not keep:
                break
        if keep:
            selected.append((config_id, config))
    if not selected:
        raise ValueError(f"selector {selector!r} matches no configurations")
    return selected


def _run_task(args) -> list[list[str]]:
    config_id, config, iteration, master_seed, n_total, m = args
    records = run_iteration(
        config, iteration, master_seed, config_id=config_id, n_total=n_total, m=m
    )
    return [record.csv_row() for record in records]


def run_experiment(options: ExperimentOptions) -> Path:
    """Execute all selected (config, iteration) tasks and write the CSV.

    Rows are written in canonical (config_id, iteration, triple) order
    whatever the worker count, so identical options give byte-identical
    output. Progress goes to stderr.
    """
    selected = select_configs(options.configs)
    tasks = [
        (config_id, config, iteration, options.master_seed, options.n_total, options.m)
        for config_id, config in selected
        for iteration in range(options.iterations)
    ]
    out_path = Path(options.out)
    started = time.perf_counter()
    # The pool must exist before the output file is opened: forked workers
    # must not inherit a buffered handle to it.
    pool = Pool(options.workers) if options.workers > 1 else None
    try:
        with open(out_path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            results = pool.imap(_run_task, tasks) if pool else map(_run_task, tasks)
            for done, rows in enumerate(results, start=1):
                writer.writerows(rows)
                if done % max(1, len(tasks) // 50) == 0 or done == len(tasks):
                    elapsed = time.perf_counter() - started
                    print(
                        f"\r{done}/{len(tasks)} tasks ({elapsed:.1f}s)",
                        end="",
                        file=sys.stderr,
                        flush=True,
                    )
    finally:
        if pool is not None:
            pool.close()
            pool.join()
        print(file=sys.stderr)
    return out_path


_METRIC_COLUMNS = ("citl", "slope", "cstat", "brier")
_BIAS_SOURCES = {
    "bias_intercept": ("coef_intercept", "gamma0_used"),
    "bias_x1": ("coef_x1", "gamma_x1"),
    "bias_x2": ("coef_x2", "gamma_x2"),
    "bias_x1x2": ("coef_x1x2", "gamma_x1x2"),
}


def _grid_frame() -> pd.DataFrame:
    grid = enumerate_grid()
    frame = pd.DataFrame([vars(config) for config in grid])
    frame.insert(0, "config_id", range(len(grid)))
    return frame


def summarize(
    results_path: Union[str, Path],
    group_by: Sequence[str] = ("mechanism", "method", "strategy", "variant"),
    stat: str = "median",
    filters: Optional[dict[str, str]] = None,
) -> pd.DataFrame:
    """Grouped medians or means of metrics, coefficients and biases.

    Coefficient biases subtract the generating value: the recorded
    per-iteration intercept for the intercept, the grid parameters for
    the x1, x2 and interaction coefficients. Error rows contribute to
    ``n_errors`` but not to the aggregates; convergence flags are
    reported as rates.
    """
    if stat not in ("median", "mean"):
        raise ValueError(f"stat must be 'median' or 'mean', got {stat!r}")
    frame = pd.read_csv(results_path)
    if frame.empty:
        raise ValueError(f"no rows in {results_path}")
    frame = frame.merge(
        _grid_frame()[["config_id", "gamma_x1", "gamma_x2", "gamma_x1x2", "pi_r1"]],
        on="config_id",
        how="left",
    )
    for bias_name, (estimate, truth) in _BIAS_SOURCES.items():
        frame[bias_name] = frame[estimate] - frame[truth]
    for key, value in (filters or {}).items():
        if key not in frame.columns:
            raise ValueError(f"unknown filter key {key!r}")
        column = frame[key]
        if pd.api.types.is_numeric_dtype(column):
            frame = frame[column == float(value)]
        else:
            frame = frame[column == value]
    if frame.empty:
        raise ValueError("filters select no rows")
    group_by = list(group_by)
    for key in group_by:
        if key not in frame.columns:
            raise ValueError(f"unknown group-by key {key!r}")

    value_columns = (
        list(_METRIC_COLUMNS)
        + [f"coef_{name}" for name in COEF_COLUMNS]
        + list(_BIAS_SOURCES)
    )
    grouped = frame.groupby(group_by, dropna=False, sort=True)
    summary = grouped[value_columns].agg(stat)
    summary["citl_converged_rate"] = grouped["citl_converged"].mean()
    summary["slope_converged_rate"] = grouped["slope_converged"].mean()
    summary["n"] = grouped.size()
    summary["n_errors"] = grouped["error_tag"].apply(lambda s: int(s.notna().sum()))
    return summary.reset_index()
