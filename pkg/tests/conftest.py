import json

import numpy as np
import pytest
from sklearn.datasets import make_blobs

from dsvm import SiteData

# Layout of the digits-like benchmark corpus: 16 features, 10 classes,
# a 3478-row held-out test set, and the 4-site shard sizes used throughout.
DIGITS_ROWS = 10992
DIGITS_FEATURES = 16
DIGITS_CLASSES = 10
DIGITS_TEST_SIZE = 3478
DIGITS_PARTITION = (1800, 2000, 1494, 2200)
DIGITS_SEED = 20150810


def make_digits_like(seed=DIGITS_SEED, rows=DIGITS_ROWS):
    """Clustered 16-feature, 10-class data standing in for a digits corpus."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 1.0, (DIGITS_CLASSES, DIGITS_FEATURES))
    y = rng.integers(0, DIGITS_CLASSES, rows)
    X = centers[y] + rng.normal(0.0, 1.0, (rows, DIGITS_FEATURES))
    return X, y


def write_csv(path, X, y):
    with open(path, "w") as fh:
        for row, label in zip(X, y):
            fh.write(",".join(f"{v:.10g}" for v in row) + f",{label}\n")
    return str(path)


@pytest.fixture(scope="session")
def digits_like_csv(tmp_path_factory):
    X, y = make_digits_like()
    path = tmp_path_factory.mktemp("corpus") / "digits_like.csv"
    return write_csv(path, X, y)


@pytest.fixture
def blobs3():
    X, y = make_blobs(n_samples=180, centers=3, n_features=2, cluster_std=1.2, random_state=7)
    return X.astype(np.float64), y.astype(np.int64)


@pytest.fixture
def blob_sites():
    """Three sites holding shards of a shared 4-class distribution."""
    X, y = make_blobs(n_samples=360, centers=4, n_features=3, cluster_std=1.0, random_state=11)
    X, y = X.astype(np.float64), y.astype(np.int64)
    return [SiteData(k + 1, X[k * 120:(k + 1) * 120], y[k * 120:(k + 1) * 120]) for k in range(3)]


def write_config(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return str(path)


def scrub_times(doc):
    """Copy of a report dict with every wall-clock field removed."""
    if isinstance(doc, dict):
        return {
            k: scrub_times(v) for k, v in doc.items() if not k.endswith("seconds")
        }
    if isinstance(doc, list):
        return [scrub_times(v) for v in doc]
    return doc
