"""Command-line harness.

    dsvm run --config experiment.json [--methods dsvm,centralized,ensemble]
             [--seed N] [--emit json|csv|table] [--fixture-matrix file.json]

Every config field has a matching override flag. Exit codes: 0 success,
1 configuration error, 2 data error, 3 every requested method failed.
"""

from __future__ import annotations

import argparse
import json
import sys

from .data import DatasetError
from .experiment import (
    ConfigError,
    ExperimentConfig,
    render_report,
    run_experiment,
    run_fixture_election,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_ALL_METHODS_FAILED = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsvm",
        description="Distributed multiclass SVM benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment or a fixture-matrix election")
    run.add_argument("--config", help="experiment config JSON file")
    run.add_argument(
        "--fixture-matrix",
        help='accuracy-matrix JSON ({"n": int, "cells": [[...]]}) for an election-only run',
    )
    run.add_argument("--methods", help="comma-separated subset of dsvm,centralized,ensemble")
    run.add_argument("--seed", type=int, help="override the experiment seed")
    run.add_argument("--emit", choices=("json", "csv", "table"), default="table")
    run.add_argument("--output", help="also write the full JSON report to this path")
    run.add_argument("--dataset", help="override the dataset CSV path")
    run.add_argument("--test-size", type=int, help="override the held-out test size")
    run.add_argument("--partition-sizes", help="override shard sizes, e.g. 500,800,500")
    run.add_argument("--shuffle-seed", type=int, help="override the partition shuffle seed")
    run.add_argument("--eval-policy", choices=("full_local", "holdout"))
    run.add_argument("--holdout-fraction", type=float)
    run.add_argument("--n-jobs", type=int, help="parallel workers for local training")
    run.add_argument("--scale-features", action="store_true", default=None)
    run.add_argument("--timing-repeats", type=int)
    run.add_argument("--c", type=float, help="override the box constraint C")
    run.add_argument("--kernel", choices=("linear", "rbf"))
    run.add_argument("--gamma", type=float)
    run.add_argument("--tol", type=float)
    run.add_argument("--max-passes", type=int)
    run.add_argument("--memory-limit-bytes", type=int)
    return parser


def _apply_overrides(doc: dict, args: argparse.Namespace) -> dict:
    if args.dataset is not None:
        doc.setdefault("dataset", {})["path"] = args.dataset
    if args.test_size is not None:
        doc["test_size"] = args.test_size
    if args.partition_sizes is not None:
        try:
            sizes = [int(s) for s in args.partition_sizes.split(",") if s.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --partition-sizes: {exc}") from exc
        doc.setdefault("partition", {})["sizes"] = sizes
    if args.shuffle_seed is not None:
        doc.setdefault("partition", {})["shuffle_seed"] = args.shuffle_seed
    if args.methods is not None:
        doc["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.eval_policy is not None:
        doc.setdefault("eval_policy", {})["kind"] = args.eval_policy
    if args.holdout_fraction is not None:
        doc.setdefault("eval_policy", {})["fraction"] = args.holdout_fraction
    if args.n_jobs is not None:
        doc["n_jobs"] = args.n_jobs
    if args.scale_features is not None:
        doc["scale_features"] = args.scale_features
    if args.timing_repeats is not None:
        doc["timing_repeats"] = args.timing_repeats
    if args.output is not None:
        doc["output"] = args.output
    train_flags = {
        "C": args.c,
        "kernel": args.kernel,
        "gamma": args.gamma,
        "tol": args.tol,
        "max_passes": args.max_passes,
        "memory_limit_bytes": args.memory_limit_bytes,
    }
    for key, value in train_flags.items():
        if value is not None:
            doc.setdefault("train", {})[key] = value
    return doc


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        if args.fixture_matrix is not None and args.config is not None:
            raise ConfigError("--config and --fixture-matrix are mutually exclusive")
        if args.fixture_matrix is not None:
            report = run_fixture_election(args.fixture_matrix)
        elif args.config is not None:
            try:
                with open(args.config) as fh:
                    doc = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: config is not valid JSON: {exc}") from exc
            if not isinstance(doc, dict):
                raise ConfigError("config must be a JSON object")
            config = ExperimentConfig.from_dict(_apply_overrides(doc, args))
            report = run_experiment(config)
        else:
            raise ConfigError("one of --config or --fixture-matrix is required")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    print(render_report(report, args.emit))
    if report.all_failed:
        print("error: every requested method failed", file=sys.stderr)
        return EXIT_ALL_METHODS_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
