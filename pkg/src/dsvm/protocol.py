"""Distributed training protocol: local models, cross-site accuracy matrix,
per-site best-model table, and frequency election of the global model.

Sites are simulated in process behind the small :class:`Site` interface
(train, score a foreign model, receive a broadcast payload), so a
networked transport could be substituted without touching the protocol
logic. All protocol outputs are deterministic for fixed inputs, whatever
the degree of training parallelism.
"""

from __future__ import annotations

import json
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import clone

from .multiclass import OneVsOneSVC, accuracy_percent
from .serialize import deserialize_model, serialize_model

DIAGONAL_SENTINEL = -1.0


@dataclass(frozen=True)
class SiteData:
    """One horizontal shard: the rows held by a single site."""

    site_id: int
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.site_id < 1:
            raise ValueError(f"site_id must be >= 1, got {self.site_id}")
        if self.X.ndim != 2 or self.X.shape[0] == 0:
            raise ValueError(f"site {self.site_id}: shard must be a nonempty 2-D matrix")
        if self.X.shape[0] != len(self.y):
            raise ValueError(
                f"site {self.site_id}: {self.X.shape[0]} rows but {len(self.y)} labels"
            )
        if not np.all(np.isfinite(self.X)):
            raise ValueError(f"site {self.site_id}: shard contains non-finite features")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class EvalPolicy:
    """How a site produces the evaluation data foreign models are scored on.

    full_local scores foreign models on the site's entire shard (and trains
    on all of it). holdout reserves a seeded fraction before training, which
    avoids the optimistic bias of scoring models on data that trained a
    competitor at the same site.
    """

    kind: str = "full_local"
    fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("full_local", "holdout"):
            raise ValueError(f"unknown eval policy {self.kind!r}")
        if self.kind == "holdout" and not 0.0 < self.fraction < 1.0:
            raise ValueError(f"holdout fraction must be in (0, 1), got {self.fraction}")

    @classmethod
    def full_local(cls) -> "EvalPolicy":
        return cls(kind="full_local")

    @classmethod
    def holdout(cls, fraction: float, seed: int = 0) -> "EvalPolicy":
        return cls(kind="holdout", fraction=fraction, seed=seed)


class Site:
    """In-process stand-in for one participant of the distributed run."""

    def __init__(self, data: SiteData, policy: EvalPolicy):
        self.data = data
        self.policy = policy
        if policy.kind == "holdout":
            rng = np.random.default_rng([policy.seed, data.site_id])
            perm = rng.permutation(data.n_rows)
            n_eval = max(1, int(round(policy.fraction * data.n_rows)))
            if n_eval >= data.n_rows:
                raise ValueError(
                    f"site {data.site_id}: holdout of {n_eval} rows leaves no training data"
                )
            eval_idx, train_idx = perm[:n_eval], perm[n_eval:]
        else:
            eval_idx = train_idx = np.arange(data.n_rows)
        self.train_X, self.train_y = data.X[train_idx], data.y[train_idx]
        self.eval_X, self.eval_y = data.X[eval_idx], data.y[eval_idx]
        self.model: OneVsOneSVC | None = None
        self.train_seconds: float | None = None
        self.global_model: OneVsOneSVC | None = None

    def train(self, estimator: OneVsOneSVC, classes) -> "Site":
        start = time.perf_counter()
        try:
            self.model = clone(estimator).fit(self.train_X, self.train_y, classes=classes)
        except Exception as exc:
            raise type(exc)(f"site {self.data.site_id}: {exc}") from exc
        self.train_seconds = time.perf_counter() - start
        return self

    def evaluate_model(self, model) -> float:
        return accuracy_percent(model, self.eval_X, self.eval_y)

    def receive_broadcast(self, payload: bytes) -> None:
        self.global_model = deserialize_model(payload)


@dataclass(eq=False, frozen=True)
class AccuracyMatrix:
    """n x n grid of cross-site accuracies; cell (i, j) holds model i's
    accuracy on site j's evaluation data, and the diagonal is a -1 sentinel.
    Indices here are 0-based; reporting uses 1-based site numbers."""

    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.float64)
        if cells.ndim != 2 or cells.shape[0] != cells.shape[1]:
            raise ValueError(f"accuracy matrix must be square, got shape {cells.shape}")
        if cells.shape[0] < 2:
            raise ValueError("accuracy matrix needs at least two sites")
        if not np.all(np.diag(cells) == DIAGONAL_SENTINEL):
            raise ValueError(f"diagonal cells must be the {DIAGONAL_SENTINEL} sentinel")
        off = ~np.eye(cells.shape[0], dtype=bool)
        if not (np.all(cells[off] >= 0.0) and np.all(cells[off] <= 100.0)):
            raise ValueError("off-diagonal accuracies must lie in [0, 100]")
        object.__setattr__(self, "cells", cells)

    @property
    def n(self) -> int:
        return self.cells.shape[0]

    @classmethod
    def from_json(cls, text: str) -> "AccuracyMatrix":
        """Parse the fixture format {"n": int, "cells": [[...]]}."""
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"invalid accuracy-matrix JSON: {exc}") from exc
        if not isinstance(doc, dict) or "n" not in doc or "cells" not in doc:
            raise ValueError('accuracy-matrix JSON must be {"n": int, "cells": [[...]]}')
        cells = np.asarray(doc["cells"], dtype=np.float64)
        if cells.shape != (doc["n"], doc["n"]):
            raise ValueError(
                f"cells shape {cells.shape} does not match n={doc['n']}"
            )
        return cls(cells)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "cells": self.cells.tolist()})


@dataclass(frozen=True)
class BestChoice:
    """Row of the best table: `model` scored highest on `site`'s data (1-based)."""

    model: int
    site: int


@dataclass(frozen=True)
class BestTable:
    rows: tuple[BestChoice, ...]


@dataclass(eq=False, frozen=True)
class ElectionResult:
    """Winning model index (1-based), per-model frequencies, and the trace."""

    global_model_index: int
    counts: dict[int, int]
    best: BestTable
    matrix: AccuracyMatrix | None = None


@dataclass(frozen=True)
class LocalModel:
    site_id: int
    model: OneVsOneSVC
    train_seconds: float


def _fit_one(estimator, X, y, classes, site_id):
    start = time.perf_counter()
    try:
        model = clone(estimator).fit(X, y, classes=classes)
    except Exception as exc:
        raise type(exc)(f"site {site_id}: {exc}") from exc
    return model, time.perf_counter() - start


def _global_classes(sites):
    return np.unique(np.concatenate([s.y for s in sites]))


def _check_uniform_features(sites):
    widths = {s.n_features for s in sites}
    if len(widths) > 1:
        raise ValueError(f"sites disagree on feature count: {sorted(widths)}")


def train_local_models(sites, estimator, classes=None, n_jobs=None):
    """Fit one model per site on that site's full shard, timing each fit.

    Fits are independent, so they may run in parallel; results are
    assembled in site order and are identical at any parallelism level.
    """
    if len(sites) < 2:
        raise ValueError(f"distributed training needs at least 2 sites, got {len(sites)}")
    _check_uniform_features(sites)
    if classes is None:
        classes = _global_classes(sites)
    fitted = Parallel(n_jobs=n_jobs)(
        delayed(_fit_one)(estimator, s.X, s.y, classes, s.site_id) for s in sites
    )
    return [
        LocalModel(site_id=s.site_id, model=model, train_seconds=seconds)
        for s, (model, seconds) in zip(sites, fitted)
    ]


def build_accuracy_matrix(models, eval_sets) -> AccuracyMatrix:
    """Score every model on every other site's evaluation data.

    eval_sets is one (X, y) pair per site, aligned with models.
    """
    n = len(models)
    if n != len(eval_sets):
        raise ValueError(f"{n} models but {len(eval_sets)} evaluation sets")
    if n < 2:
        raise ValueError("accuracy matrix needs at least two sites")
    cells = np.full((n, n), DIAGONAL_SENTINEL)
    for i, model in enumerate(models):
        for j, (X, y) in enumerate(eval_sets):
            if i != j:
                cells[i, j] = accuracy_percent(model, X, y)
    return AccuracyMatrix(cells)


def select_best_per_site(matrix: AccuracyMatrix) -> BestTable:
    """For each site j, the model with the highest accuracy on j's data.

    Ties resolve to the smallest model index. The -1 diagonal sentinel can
    never win against accuracies in [0, 100].
    """
    rows = []
    for j in range(matrix.n):
        i = int(np.argmax(matrix.cells[:, j]))
        rows.append(BestChoice(model=i + 1, site=j + 1))
    return BestTable(rows=tuple(rows))


def elect_global_model(best: BestTable, matrix: AccuracyMatrix | None = None) -> ElectionResult:
    """Pick the model appearing most often in the best table.

    Frequency ties resolve to the smallest model index.
    """
    if not best.rows:
        raise ValueError("best table is empty")
    tally = Counter(row.model for row in best.rows)
    n = len(best.rows)
    counts = {model: tally.get(model, 0) for model in range(1, n + 1)}
    winner = max(counts, key=lambda model: (counts[model], -model))
    return ElectionResult(
        global_model_index=winner, counts=counts, best=best, matrix=matrix
    )


@dataclass(eq=False, frozen=True)
class DsvmRun:
    """Everything produced by one distributed run.

    global_model is the deserialized broadcast copy, i.e. exactly what
    every site's registry ends up holding.
    """

    global_model: OneVsOneSVC
    election: ElectionResult
    sites: tuple[Site, ...]
    per_site_train_seconds: tuple[float, ...]
    train_seconds: float  # max over sites: local fits run in parallel
    payload_bytes: int
    broadcast_bytes: int  # payload size times the (n - 1) receiving sites


def run_dsvm(sites_data, estimator, eval_policy: EvalPolicy | None = None,
             classes=None, n_jobs=None) -> DsvmRun:
    """Full protocol round: local training, accuracy matrix, per-site best
    table, frequency election, and broadcast of the winning model."""
    if len(sites_data) < 2:
        raise ValueError(f"distributed training needs at least 2 sites, got {len(sites_data)}")
    _check_uniform_features(sites_data)
    policy = eval_policy or EvalPolicy.full_local()
    if classes is None:
        classes = _global_classes(sites_data)

    sites = list(
        Parallel(n_jobs=n_jobs)(
            delayed(Site.train)(Site(sd, policy), estimator, classes) for sd in sites_data
        )
    )

    matrix = build_accuracy_matrix(
        [s.model for s in sites], [(s.eval_X, s.eval_y) for s in sites]
    )
    election = elect_global_model(select_best_per_site(matrix), matrix)

    payload = serialize_model(sites[election.global_model_index - 1].model)
    for site in sites:
        site.receive_broadcast(payload)

    per_site = tuple(s.train_seconds for s in sites)
    return DsvmRun(
        global_model=deserialize_model(payload),
        election=election,
        sites=tuple(sites),
        per_site_train_seconds=per_site,
        train_seconds=max(per_site),
        payload_bytes=len(payload),
        broadcast_bytes=len(payload) * (len(sites) - 1),
    )
