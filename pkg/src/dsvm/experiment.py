"""Experiment harness: one configuration in, one comparable report out.

The report carries, per requested method, the accuracy on the shared
global test set, training and testing wall times (monotonic clock,
seconds), and either results or a recorded failure; the distributed
method additionally carries its full election trace and broadcast
accounting. Reports are deterministic for a fixed config and seed except
for the wall-clock fields.
"""

from __future__ import annotations

import dataclasses
import json
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import VotingEnsemble, train_centralized
from .data import (
    Dataset,
    DatasetError,
    DatasetSchema,
    PartitionSpec,
    load_csv,
    minmax_apply,
    minmax_fit,
    partition_horizontal,
    train_test_split,
)
from .multiclass import OneVsOneSVC, accuracy_percent
from .protocol import EvalPolicy, SiteData, run_dsvm

METHODS = ("dsvm", "centralized", "ensemble")
TIMING_UNIT = "seconds"


class ConfigError(ValueError):
    """The experiment configuration is invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str
    schema: DatasetSchema
    partition: PartitionSpec
    test_size: int
    has_header: bool = False
    train_params: dict = field(default_factory=dict)
    eval_policy: EvalPolicy = field(default_factory=EvalPolicy.full_local)
    methods: tuple[str, ...] = METHODS
    seed: int = 0
    n_jobs: int | None = None
    scale_features: bool = False
    timing_repeats: int = 3
    output: str | None = None

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("at least one method must be requested")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.test_size < 1:
            raise ConfigError(f"test_size must be >= 1, got {self.test_size}")
        if self.timing_repeats < 1:
            raise ConfigError(f"timing_repeats must be >= 1, got {self.timing_repeats}")
        if len(self.partition.sizes) < 2:
            raise ConfigError("the comparison needs at least 2 sites")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            dataset = dict(doc["dataset"])
            partition = dict(doc["partition"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"config is missing required section: {exc}") from exc
        try:
            schema = DatasetSchema(
                feature_count=int(dataset["feature_count"]),
                label_column=dataset.get("label_column", -1),
                class_names=(
                    tuple(dataset["class_names"]) if dataset.get("class_names") else None
                ),
            )
            policy_doc = doc.get("eval_policy") or {"kind": "full_local"}
            policy = EvalPolicy(
                kind=policy_doc.get("kind", "full_local"),
                fraction=float(policy_doc.get("fraction", 0.2)),
                seed=int(policy_doc.get("seed", doc.get("seed", 0))),
            )
            seed = int(doc.get("seed", 0))
            shuffle_seed = partition.get("shuffle_seed")
            return cls(
                dataset_path=str(dataset["path"]),
                schema=schema,
                has_header=bool(dataset.get("has_header", False)),
                partition=PartitionSpec(
                    sizes=tuple(int(s) for s in partition["sizes"]),
                    shuffle_seed=int(shuffle_seed) if shuffle_seed is not None else seed + 1,
                ),
                test_size=int(doc["test_size"]),
                train_params=dict(doc.get("train", {})),
                eval_policy=policy,
                methods=tuple(doc.get("methods", METHODS)),
                seed=seed,
                n_jobs=doc.get("n_jobs"),
                scale_features=bool(doc.get("scale_features", False)),
                timing_repeats=int(doc.get("timing_repeats", 3)),
                output=doc.get("output"),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config value: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def make_estimator(self) -> OneVsOneSVC:
        params = dict(self.train_params)
        allowed = set(OneVsOneSVC().get_params())
        unknown = set(params) - allowed
        if unknown:
            raise ConfigError(
                f"unknown training parameters {sorted(unknown)}; allowed: {sorted(allowed)}"
            )
        return OneVsOneSVC(**params)


@dataclass
class MethodReport:
    accuracy: float | None = None
    train_seconds: float | None = None
    test_seconds: float | None = None
    error: str | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "accuracy": self.accuracy,
            "train_seconds": self.train_seconds,
            "test_seconds": self.test_seconds,
            "error": self.error,
        }
        doc.update(self.extras)
        return doc


@dataclass
class ExperimentReport:
    dataset: dict
    config: dict
    methods: dict  # method name -> MethodReport
    timing_unit: str = TIMING_UNIT

    def to_dict(self) -> dict:
        return {
            "kind": "experiment",
            "timing_unit": self.timing_unit,
            "dataset": self.dataset,
            "config": self.config,
            "methods": {name: rep.to_dict() for name, rep in self.methods.items()},
        }

    @property
    def all_failed(self) -> bool:
        return all(rep.error is not None for rep in self.methods.values())


def _timed_accuracy(model, X, y, repeats):
    """Accuracy plus the median wall time of `repeats` scoring passes."""
    times = []
    accuracy = None
    for _ in range(repeats):
        start = time.perf_counter()
        accuracy = accuracy_percent(model, X, y)
        times.append(time.perf_counter() - start)
    return accuracy, statistics.median(times)


def _election_trace(run) -> dict:
    election = run.election
    return {
        "matrix": election.matrix.cells.tolist(),
        "best": [[row.model, row.site] for row in election.best.rows],
        "counts": {str(k): v for k, v in election.counts.items()},
        "elected": election.global_model_index,
    }


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Execute every requested method on identical splits and partitions."""
    dataset = load_csv(config.dataset_path, config.schema, has_header=config.has_header)
    train_ds, test_ds = train_test_split(dataset, config.test_size, config.seed)
    shards = partition_horizontal(train_ds, config.partition)

    if config.scale_features:
        # Min-max bounds come from the union of the training shards only; a
        # real deployment would need a scaler exchange between sites, which
        # is outside the protocol simulated here.
        lo, span = minmax_fit(np.vstack([s.X for s in shards]))
        shards = [
            SiteData(site_id=s.site_id, X=minmax_apply(s.X, lo, span), y=s.y) for s in shards
        ]
        test_ds = Dataset(minmax_apply(test_ds.X, lo, span), test_ds.y, test_ds.class_names)

    classes = np.arange(dataset.n_classes)
    estimator = config.make_estimator()
    test_X, test_y = test_ds.X, test_ds.y

    methods: dict[str, MethodReport] = {}
    dsvm_run = None

    needs_locals = "dsvm" in config.methods or "ensemble" in config.methods
    locals_error: str | None = None
    if needs_locals:
        try:
            dsvm_run = run_dsvm(
                shards,
                estimator,
                eval_policy=config.eval_policy,
                classes=classes,
                n_jobs=config.n_jobs,
            )
        except Exception as exc:
            locals_error = f"{type(exc).__name__}: {exc}"

    if "dsvm" in config.methods:
        report = MethodReport()
        if dsvm_run is None:
            report.error = locals_error
        else:
            report.accuracy, report.test_seconds = _timed_accuracy(
                dsvm_run.global_model, test_X, test_y, config.timing_repeats
            )
            report.train_seconds = dsvm_run.train_seconds
            report.extras = {
                "per_site": [
                    {
                        "site_id": site.data.site_id,
                        "train_seconds": seconds,
                        "global_test_accuracy": accuracy_percent(site.model, test_X, test_y),
                    }
                    for site, seconds in zip(dsvm_run.sites, dsvm_run.per_site_train_seconds)
                ],
                "election": _election_trace(dsvm_run),
                "payload_bytes": dsvm_run.payload_bytes,
                "broadcast_bytes": dsvm_run.broadcast_bytes,
            }
        methods["dsvm"] = report

    if "centralized" in config.methods:
        report = MethodReport()
        try:
            model, train_seconds = train_centralized(shards, estimator, classes=classes)
            report.accuracy, report.test_seconds = _timed_accuracy(
                model, test_X, test_y, config.timing_repeats
            )
            report.train_seconds = train_seconds
        except Exception as exc:
            report.error = f"{type(exc).__name__}: {exc}"
        methods["centralized"] = report

    if "ensemble" in config.methods:
        report = MethodReport()
        if dsvm_run is None:
            report.error = locals_error
        else:
            ensemble = VotingEnsemble([site.model for site in dsvm_run.sites])
            report.accuracy, report.test_seconds = _timed_accuracy(
                ensemble, test_X, test_y, config.timing_repeats
            )
            # same local fits as the distributed method, built in parallel
            report.train_seconds = dsvm_run.train_seconds
            report.extras = {"n_members": len(ensemble.members)}
        methods["ensemble"] = report

    report = ExperimentReport(
        dataset={
            "path": config.dataset_path,
            "rows": dataset.n_rows,
            "features": dataset.n_features,
            "classes": dataset.n_classes,
            "class_names": list(dataset.class_names),
            "test_size": config.test_size,
        },
        config={
            "seed": config.seed,
            "partition_sizes": list(config.partition.sizes),
            "shuffle_seed": config.partition.shuffle_seed,
            "methods": list(config.methods),
            "eval_policy": dataclasses.asdict(config.eval_policy),
            "train_params": config.make_estimator().get_params(),
            "n_jobs": config.n_jobs,
            "scale_features": config.scale_features,
            "timing_repeats": config.timing_repeats,
        },
        methods=methods,
    )
    if config.output:
        with open(config.output, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    return report


@dataclass
class ElectionReport:
    """Election-only report for fixture-matrix runs (no training)."""

    fixture_path: str
    election: dict
    timing_unit: str = TIMING_UNIT

    def to_dict(self) -> dict:
        return {
            "kind": "election",
            "fixture_matrix": self.fixture_path,
            "election": self.election,
        }

    @property
    def all_failed(self) -> bool:
        return False


def run_fixture_election(path: str) -> ElectionReport:
    """Run only the selection and election stages on a stored matrix."""
    from .protocol import AccuracyMatrix, elect_global_model, select_best_per_site

    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DatasetError(f"cannot read fixture matrix {path!r}: {exc}") from exc
    try:
        matrix = AccuracyMatrix.from_json(text)
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from exc
    election = elect_global_model(select_best_per_site(matrix), matrix)
    return ElectionReport(
        fixture_path=path,
        election={
            "matrix": matrix.cells.tolist(),
            "best": [[row.model, row.site] for row in election.best.rows],
            "counts": {str(k): v for k, v in election.counts.items()},
            "elected": election.global_model_index,
        },
    )


def render_report(report, fmt: str) -> str:
    """Render a report as lossless JSON, flat CSV rows, or a comparison table."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2)
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "table":
        return _render_table(report)
    raise ConfigError(f"unknown output format {fmt!r}; choose json, csv, or table")


def _fmt_cell(value, pattern="{:.4f}"):
    return "-" if value is None else pattern.format(value)


def _render_csv(report) -> str:
    doc = report.to_dict()
    lines = []
    if doc["kind"] == "election":
        lines.append("model,best_count,elected")
        counts = doc["election"]["counts"]
        elected = doc["election"]["elected"]
        for model in sorted(counts, key=int):
            lines.append(f"{model},{counts[model]},{int(model) == elected}")
        return "\n".join(lines)
    lines.append("method,accuracy,train_seconds,test_seconds,error")
    for name, rep in doc["methods"].items():
        err = (rep["error"] or "").replace(",", ";").replace("\n", " ")
        lines.append(
            f"{name},{_fmt_cell(rep['accuracy'], '{:.17g}')},"
            f"{_fmt_cell(rep['train_seconds'], '{:.17g}')},"
            f"{_fmt_cell(rep['test_seconds'], '{:.17g}')},{err}"
        )
    return "\n".join(lines)


def _render_table(report) -> str:
    doc = report.to_dict()
    lines = []
    if doc["kind"] == "election":
        election = doc["election"]
        lines.append(f"fixture matrix: {doc['fixture_matrix']}")
        lines.append("site  best model")
        for model, site in election["best"]:
            lines.append(f"{site:>4}  SVM_{model}")
        counts = ", ".join(
            f"SVM_{m}: {c}" for m, c in sorted(election["counts"].items(), key=lambda kv: int(kv[0]))
        )
        lines.append(f"counts: {counts}")
        lines.append(f"elected global model: SVM_{election['elected']}")
        return "\n".join(lines)

    header = f"{'method':<12} {'accuracy':>9} {'tr.time':>10} {'te.time':>10}"
    lines.append(f"timing unit: {doc['timing_unit']}")
    lines.append(header)
    lines.append("-" * len(header))
    for name, rep in doc["methods"].items():
        lines.append(
            f"{name:<12} {_fmt_cell(rep['accuracy'], '{:9.2f}')} "
            f"{_fmt_cell(rep['train_seconds'], '{:10.4f}')} "
            f"{_fmt_cell(rep['test_seconds'], '{:10.4f}')}"
        )
        if rep["error"]:
            lines.append(f"{'':<12} failed: {rep['error']}")
    dsvm_rep = doc["methods"].get("dsvm")
    if dsvm_rep and not dsvm_rep.get("error") and "election" in dsvm_rep:
        lines.append(f"elected global model: SVM_{dsvm_rep['election']['elected']}")
    return "\n".join(lines)
