"""Command-line interface: simulate, summarize, predict."""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .artifact import read_model_artifact
from .cpm import PartialRecord, predict_single
from .harness import ExperimentOptions, run_experiment, summarize


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpmsim",
        description="Missing-data simulation for clinical prediction models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the simulation and write a results CSV")
    sim.add_argument("--seed", type=int, required=True, help="master seed (u64)")
    sim.add_argument("--iterations", type=int, default=200)
    sim.add_argument(
        "--configs",
        default="all",
        help="'all', comma list of ids, or key=value predicates "
        "(e.g. mechanism=MAR,pi_r1=0.5)",
    )
    sim.add_argument("--n", type=int, default=None, help="records per iteration (default 10000)")
    sim.add_argument("--m", type=int, default=20, help="imputations per MI run")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", required=True)

    summ = sub.add_parser("summarize", help="aggregate a results CSV")
    summ.add_argument("--in", dest="results", required=True)
    summ.add_argument("--group-by", default="mechanism,method,strategy,variant")
    summ.add_argument("--stat", choices=("median", "mean"), default="median")
    summ.add_argument("--filter", default="", help="comma list of key=value conditions")
    summ.add_argument("--out", default=None, help="output CSV (default: stdout)")

    pred = sub.add_parser("predict", help="score one record against a model artifact")
    pred.add_argument("--model", required=True)
    pred.add_argument("--x2", type=float, required=True)
    pred.add_argument("--x1", type=float, default=None)
    pred.add_argument("--allow-missing", action="store_true")
    return parser


def _parse_filters(text: str) -> dict[str, str]:
    filters = {}
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        key, sep, value = token.partition("=")
        if not sep:
            raise ValueError(f"malformed filter {token!r}, expected key=value")
        filters[key.strip()] = value.strip()
    return filters


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "simulate":
        options = ExperimentOptions(
            master_seed=args.seed,
            out=args.out,
            iterations=args.iterations,
            configs=args.configs,
            n_total=args.n,
            m=args.m,
            workers=args.workers,
        )
        path = run_experiment(options)
        print(path)
        return 0
    if args.command == "summarize":
        table = summarize(
            args.results,
            group_by=[key.strip() for key in args.group_by.split(",") if key.strip()],
            stat=args.stat,
            filters=_parse_filters(args.filter),
        )
        if args.out is None:
            print(table.to_csv(index=False), end="")
        else:
            table.to_csv(args.out, index=False)
            print(args.out)
        return 0
    if args.command == "predict":
        cpm, spec, imputation = read_model_artifact(args.model)
        record = PartialRecord(x2=args.x2, x1=args.x1)
        try:
            probability = predict_single(
                cpm, spec, imputation, record, allow_missing=args.allow_missing
            )
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(probability)
        return 0
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
