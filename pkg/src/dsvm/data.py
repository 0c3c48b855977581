"""Dataset ingestion, horizontal partitioning, and train/test splitting."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed input files or invalid partition/split requests."""


@dataclass(frozen=True)
class DatasetSchema:
    """Shape of one CSV dataset: q feature columns plus one label column.

    label_column selects the label by zero-based index (negative indices
    count from the end; default last column) or by header name when the
    file has a header row. class_names, when given, fixes the label
    universe and its integer encoding order; otherwise labels are
    collected from the file and encoded in sorted order.
    """

    feature_count: int
    label_column: int | str = -1
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.feature_count < 1:
            raise DatasetError(f"feature_count must be >= 1, got {self.feature_count}")
        if self.class_names is not None:
            names = tuple(str(n) for n in self.class_names)
            if len(set(names)) != len(names):
                raise DatasetError("class_names must be distinct")
            object.__setattr__(self, "class_names", names)


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, integer labels, and the label-name encoding."""

    X: np.ndarray
    y: np.ndarray
    class_names: tuple[str, ...]

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, indices) -> "Dataset":
        return Dataset(self.X[indices], self.y[indices], self.class_names)


@dataclass(frozen=True)
class PartitionSpec:
    """Shard sizes for a horizontal split, with an optional seeded shuffle."""

    sizes: tuple[int, ...]
    shuffle_seed: int | None = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes:
            raise DatasetError("partition needs at least one shard size")
        if any(s < 1 for s in sizes):
            raise DatasetError(f"shard sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)


def load_csv(path, schema: DatasetSchema, has_header: bool = False) -> Dataset:
    """Read a CSV of q float features plus one label column.

    Rejects rows of the wrong width, non-numeric or non-finite features,
    and labels outside the schema's class_names; errors carry 1-based file
    line numbers. Row order is preserved.
    """
    q = schema.feature_count
    rows: list[list[float]] = []
    labels: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        if has_header:
            try:
                header = next(reader)
            except StopIteration:
                raise DatasetError(f"{path}: empty file") from None
            header = [h.strip() for h in header]
        label_col = schema.label_column
        if isinstance(label_col, str):
            if header is None:
                raise DatasetError(
                    f"label column {label_col!r} given by name but the file has no header"
                )
            try:
                label_col = header.index(label_col)
            except ValueError:
                raise DatasetError(
                    f"label column {schema.label_column!r} not found in header {header}"
                ) from None
        width = q + 1
        if label_col < 0:
            label_col += width
        if not 0 <= label_col < width:
            raise DatasetError(
                f"label column index {schema.label_column} out of range for {width} columns"
            )

        for lineno, row in enumerate(reader, start=2 if has_header else 1):
            if not row:
                continue
            if len(row) != width:
                raise DatasetError(
                    f"{path}: row {lineno}: expected {width} columns, got {len(row)}"
                )
            labels.append(row[label_col].strip())
            feats = row[:label_col] + row[label_col + 1:]
            try:
                values = [float(v) for v in feats]
            except ValueError:
                raise DatasetError(f"{path}: row {lineno}: non-numeric feature value") from None
            if not all(np.isfinite(values)):
                raise DatasetError(f"{path}: row {lineno}: non-finite feature value")
            rows.append(values)

    if not rows:
        raise DatasetError(f"{path}: no data rows")
    class_names = schema.class_names
    if class_names is None:
        class_names = tuple(sorted(set(labels)))
    encoding = {name: code for code, name in enumerate(class_names)}
    y = np.empty(len(labels), dtype=np.int64)
    for k, name in enumerate(labels):
        if name not in encoding:
            raise DatasetError(f"{path}: unknown label {name!r} (classes: {list(class_names)})")
        y[k] = encoding[name]
    X = np.array(rows, dtype=np.float64)
    return Dataset(X, y, class_names)


def train_test_split(data: Dataset, test_size: int, seed: int):
    """Seeded, disjoint, exhaustive split into (train, test)."""
    n = data.n_rows
    if not 0 < test_size < n:
        raise DatasetError(
            f"test_size must be in 1..{n - 1} for a {n}-row dataset, got {test_size}"
        )
    perm = np.random.default_rng(seed).permutation(n)
    return data.subset(perm[test_size:]), data.subset(perm[:test_size])


def partition_horizontal(data: Dataset, spec: PartitionSpec):
    """Cut the dataset into contiguous shards of the requested sizes.

    With a shuffle_seed the rows are permuted first; shards then take
    consecutive blocks, so their multiset union is exactly the first
    sum(sizes) rows of the (shuffled) dataset.
    """
    from .protocol import SiteData

    total = sum(spec.sizes)
    if total > data.n_rows:
        raise DatasetError(
            f"partition sizes sum to {total} but the dataset has {data.n_rows} rows"
        )
    if spec.shuffle_seed is not None:
        order = np.random.default_rng(spec.shuffle_seed).permutation(data.n_rows)
    else:
        order = np.arange(data.n_rows)
    shards = []
    start = 0
    for site_id, size in enumerate(spec.sizes, start=1):
        idx = order[start:start + size]
        shards.append(SiteData(site_id=site_id, X=data.X[idx], y=data.y[idx]))
        start += size
    return shards


def minmax_fit(X):
    """Per-feature (low, span) over X; constant features get span 1."""
    X = np.asarray(X, dtype=np.float64)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span[span == 0.0] = 1.0
    return lo, span


def minmax_apply(X, lo, span):
    return (np.asarray(X, dtype=np.float64) - lo) / span
