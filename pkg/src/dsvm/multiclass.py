"""One-vs-one multiclass composition over the binary SVM."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .svm import BinarySVC


class OneVsOneSVC(BaseEstimator, ClassifierMixin):
    """Multiclass classifier voting over one binary SVM per class pair.

    For N classes, N(N-1)/2 binary models are trained, each only on the
    two classes it separates. In the pair (a, b) with a < b, class a is
    encoded +1 and class b is encoded -1. Prediction counts one vote per
    pair and returns the class with the most votes; ties go to the
    smallest class label.

    Parameters mirror :class:`BinarySVC` and are applied to every pair.

    Attributes
    ----------
    classes_ : ndarray of sorted class labels
    pair_models_ : dict mapping (class_a, class_b) with a < b to the
        fitted BinarySVC for that pair
    n_features_in_ : int
    """

    def __init__(self, C=1.0, kernel="linear", gamma=1.0, tol=1e-3, max_passes=10,
                 memory_limit_bytes=None):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes
        self.memory_limit_bytes = memory_limit_bytes

    def fit(self, X, y, classes=None):
        """Fit one binary model per class pair.

        `classes` fixes the label universe (defaults to the labels present
        in y). Every listed class must have at least one example, otherwise
        pair voting would be ill-defined.
        """
        X, y = check_X_y(X, y, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        present = np.unique(y)
        if classes is None:
            class_list = present
        else:
            class_list = np.unique(np.asarray(list(classes), dtype=np.int64))
            unknown = np.setdiff1d(present, class_list)
            if unknown.size:
                raise ValueError(f"labels {unknown.tolist()} not in the declared classes")
            missing = np.setdiff1d(class_list, present)
            if missing.size:
                raise ValueError(
                    f"classes {missing.tolist()} have no training examples; "
                    "one-vs-one voting would be ill-defined"
                )
        if class_list.size < 2:
            raise ValueError(
                f"one-vs-one training needs at least two classes, got {class_list.size}"
            )

        pair_models = {}
        for ia in range(class_list.size):
            for ib in range(ia + 1, class_list.size):
                ca, cb = int(class_list[ia]), int(class_list[ib])
                mask = (y == ca) | (y == cb)
                y_pm = np.where(y[mask] == ca, 1, -1)
                model = BinarySVC(
                    C=self.C, kernel=self.kernel, gamma=self.gamma, tol=self.tol,
                    max_passes=self.max_passes, memory_limit_bytes=self.memory_limit_bytes,
                )
                pair_models[(ca, cb)] = model.fit(X[mask], y_pm)

        self.classes_ = class_list
        self.pair_models_ = pair_models
        self.n_features_in_ = X.shape[1]
        return self

    def _check_input(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"input has {X.shape[1]} features but the model was trained "
                f"with {self.n_features_in_}"
            )
        return X

    def vote_matrix(self, X):
        """Per-class vote counts, shape (n_samples, n_classes).

        Row sums always equal the number of pairs.
        """
        check_is_fitted(self, "pair_models_")
        X = self._check_input(X)
        index = {int(c): k for k, c in enumerate(self.classes_)}
        votes = np.zeros((X.shape[0], self.classes_.size), dtype=np.int64)
        for (ca, cb), model in self.pair_models_.items():
            dec = model.decision_function(X)
            pos = dec >= 0.0
            votes[pos, index[ca]] += 1
            votes[~pos, index[cb]] += 1
        return votes

    def predict(self, X):
        votes = self.vote_matrix(X)
        return self.classes_[np.argmax(votes, axis=1)]


def accuracy_percent(model, X, y):
    """Accuracy of `model` on a labeled set, as a percentage in [0, 100]."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("evaluation set is empty")
    return 100.0 * float(np.mean(model.predict(X) == y))
