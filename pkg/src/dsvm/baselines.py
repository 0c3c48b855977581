"""Comparison methods: centralized training on the union of shards, and
majority voting over every site's local model."""

from __future__ import annotations

import time

import numpy as np
from sklearn.base import clone

from .multiclass import accuracy_percent


def train_centralized(sites, estimator, classes=None):
    """Train one model on all shards brought to a single site.

    Shards are concatenated in site order, so the result is independent of
    where the shard boundaries fell. Returns (model, train_seconds).
    Resource failures (e.g. a kernel matrix over the configured memory
    budget) propagate to the caller: the harness records them as an
    experimental outcome instead of masking them.
    """
    if not sites:
        raise ValueError("no sites to centralize")
    X = np.vstack([s.X for s in sites])
    y = np.concatenate([s.y for s in sites])
    start = time.perf_counter()
    model = clone(estimator).fit(X, y, classes=classes)
    return model, time.perf_counter() - start


class VotingEnsemble:
    """Majority vote over per-site models; ties go to the smallest label.

    Every member scores every query, which is exactly what makes the
    ensemble's testing time the interesting comparison point against a
    single elected model.
    """

    def __init__(self, members):
        members = list(members)
        if not members:
            raise ValueError("ensemble needs at least one member")
        widths = {m.n_features_in_ for m in members}
        if len(widths) > 1:
            raise ValueError(f"members disagree on feature count: {sorted(widths)}")
        self.members = members
        self.classes_ = np.unique(np.concatenate([m.classes_ for m in members]))
        self.n_features_in_ = members[0].n_features_in_

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros((X.shape[0], self.classes_.size), dtype=np.int64)
        for member in self.members:
            pred = member.predict(X)
            for k, c in enumerate(self.classes_):
                votes[pred == c, k] += 1
        # argmax returns the first maximum, i.e. the smallest class label
        return self.classes_[np.argmax(votes, axis=1)]


def evaluate_ensemble(ensemble: VotingEnsemble, X, y):
    """Accuracy percent plus the wall time of the full-ensemble pass."""
    start = time.perf_counter()
    accuracy = accuracy_percent(ensemble, X, y)
    return accuracy, time.perf_counter() - start
