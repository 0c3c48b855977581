"""Soft-margin binary SVM trained by SMO-style coordinate ascent on the dual."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

KERNEL_KINDS = ("linear", "rbf")

# Multipliers at or below this are numerical zeros and are pruned from models.
ZERO_ALPHA = 1e-8

# The pair-selection loop runs until the maximal violating-pair gap falls
# below min(tol, _CONVERGENCE_GAP). Driving the gap this far below the
# KKT verification tolerance makes dual objectives reproducible against
# exact oracles instead of stopping epsilon-short of the optimum.
_CONVERGENCE_GAP = 1e-9

# Floor for the two-variable subproblem curvature (duplicate points).
_QUAD_FLOOR = 1e-12


class ResourceLimitError(MemoryError):
    """A training problem exceeds the configured memory budget."""


def kernel_matrix(X, Y, kernel="linear", gamma=1.0):
    """Pairwise kernel values between rows of X and rows of Y.

    linear -> X @ Y.T; rbf -> exp(-gamma * ||x - y||^2) with gamma > 0.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(
            f"kernel operands have mismatched dimensions: {X.shape[1]} vs {Y.shape[1]}"
        )
    if kernel == "linear":
        return X @ Y.T
    if kernel == "rbf":
        if gamma is None or not gamma > 0:
            raise ValueError(f"rbf kernel requires gamma > 0, got {gamma!r}")
        sq = np.sum(X * X, axis=1)[:, None] + np.sum(Y * Y, axis=1)[None, :] - 2.0 * (X @ Y.T)
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-gamma * sq)
    raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNEL_KINDS}")


def kernel_eval(x, y, kernel="linear", gamma=1.0):
    """Kernel value for a single pair of feature vectors."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise ValueError(
            f"feature vectors have mismatched lengths: {x.shape[0]} vs {y.shape[0]}"
        )
    return float(kernel_matrix(x[None, :], y[None, :], kernel=kernel, gamma=gamma)[0, 0])


def _smo_solve(Q, y, C, stop_gap, max_passes, iter_cap):
    """Maximize sum(a) - a.Q.a/2 subject to 0 <= a <= C and a.y == 0.

    Working pairs are chosen by first-order max violation for i and a
    second-order gain estimate for j; ties resolve to the smallest index,
    so the iteration path is deterministic. `max_passes` bounds the number
    of consecutive size-n iteration blocks without objective progress.
    """
    n = Q.shape[0]
    qdiag = np.ascontiguousarray(np.diag(Q))
    yf = y.astype(np.float64)
    pos = yf > 0
    alpha = np.zeros(n)
    grad = np.full(n, -1.0)  # gradient of the minimization form a.Q.a/2 - sum(a)

    block = max(n, 16)
    stall = 0
    prev_obj = 0.0
    it = 0
    while it < iter_cap:
        gy = -yf * grad
        at_upper = alpha >= C
        at_lower = alpha <= 0.0
        up = np.where(pos, ~at_upper, ~at_lower)
        low = np.where(pos, ~at_lower, ~at_upper)
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, gy, -np.inf)))
        m = gy[i]
        big_m = float(np.min(np.where(low, gy, np.inf)))
        if m - big_m <= stop_gap:
            break

        cand = low & (gy < m)
        if not cand.any():
            break
        diff = m - gy
        quad = np.maximum(qdiag[i] + qdiag - 2.0 * yf[i] * yf * Q[i], _QUAD_FLOOR)
        j = int(np.argmax(np.where(cand, diff * diff / quad, -np.inf)))

        old_i, old_j = alpha[i], alpha[j]
        qij = Q[i, j]
        if yf[i] != yf[j]:
            quad_ij = max(qdiag[i] + qdiag[j] + 2.0 * qij, _QUAD_FLOOR)
            delta = (-grad[i] - grad[j]) / quad_ij
            gap = old_i - old_j
            alpha[i] += delta
            alpha[j] += delta
            if gap > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = gap
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -gap
            if gap > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - gap
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + gap
        else:
            quad_ij = max(qdiag[i] + qdiag[j] - 2.0 * qij, _QUAD_FLOOR)
            delta = (grad[i] - grad[j]) / quad_ij
            total = old_i + old_j
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

        grad += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
        it += 1
        if it % block == 0:
            obj = 0.5 * (alpha.sum() - alpha @ grad)
            if obj - prev_obj <= 1e-12 * (1.0 + abs(obj)):
                stall += 1
                if stall >= max_passes:
                    break
            else:
                stall = 0
            prev_obj = obj
    return alpha, it


class BinarySVC(BaseEstimator, ClassifierMixin):
    """Binary soft-margin support vector classifier.

    Solves the box-constrained dual problem with a deterministic SMO-style
    pair solver; the fitted model keeps only the support vectors.

    Parameters
    ----------
    C : float, default=1.0
        Box constraint on the dual multipliers. Large C approaches the
        hard-margin classifier.
    kernel : {"linear", "rbf"}, default="linear"
    gamma : float, default=1.0
        RBF width; ignored for the linear kernel.
    tol : float, default=1e-3
        KKT tolerance: every training point satisfies its complementarity
        condition within tol at the returned solution.
    max_passes : int, default=10
        Consecutive no-progress iteration blocks allowed before the solver
        stops, guarding against numerically stalled problems.
    memory_limit_bytes : int or None, default=None
        Refuse problems whose dense kernel matrix would exceed this budget.

    Attributes
    ----------
    support_ : ndarray of indices of the support vectors in the training set
    support_vectors_ : ndarray of shape (n_sv, n_features)
    support_labels_ : ndarray of shape (n_sv,), entries in {-1, +1}
    alphas_ : ndarray of shape (n_sv,), multipliers in (0, C]
    intercept_ : float
    dual_objective_ : float, dual objective value at the solution
    n_iter_ : int
    """

    def __init__(self, C=1.0, kernel="linear", gamma=1.0, tol=1e-3, max_passes=10,
                 memory_limit_bytes=None):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes
        self.memory_limit_bytes = memory_limit_bytes

    def _validate_params_strict(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C!r}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if not (isinstance(self.max_passes, (int, np.integer)) and self.max_passes >= 1):
            raise ValueError(f"max_passes must be a positive integer, got {self.max_passes!r}")
        if self.kernel not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel {self.kernel!r}; expected one of {KERNEL_KINDS}")
        if self.kernel == "rbf" and not (self.gamma is not None and self.gamma > 0):
            raise ValueError(f"rbf kernel requires gamma > 0, got {self.gamma!r}")

    def fit(self, X, y):
        """Fit on labels in {-1, +1}. Raises on single-class input."""
        self._validate_params_strict()
        X, y = check_X_y(X, y, dtype=np.float64)
        y = np.asarray(y)
        if not np.all(np.isin(y, (-1, 1))):
            bad = sorted(set(np.unique(y)) - {-1, 1})
            raise ValueError(f"binary labels must be -1 or +1, got {bad}")
        y = y.astype(np.int64)
        if np.all(y == y[0]):
            raise ValueError("degenerate binary problem: only one class present")

        n = X.shape[0]
        needed = n * n * 8
        if self.memory_limit_bytes is not None and needed > self.memory_limit_bytes:
            raise ResourceLimitError(
                f"kernel matrix for {n} rows needs {needed} bytes, "
                f"over the {self.memory_limit_bytes} byte limit"
            )
        K = kernel_matrix(X, X, kernel=self.kernel, gamma=self.gamma)
        yf = y.astype(np.float64)
        Q = (yf[:, None] * yf[None, :]) * K

        stop_gap = min(float(self.tol), _CONVERGENCE_GAP)
        iter_cap = 500 * n + 50_000
        alpha, n_iter = _smo_solve(Q, y, float(self.C), stop_gap, int(self.max_passes), iter_cap)

        # Bias from free support vectors; midpoint of the feasible interval
        # when every multiplier sits on a bound.
        raw = yf * (Q @ alpha)  # decision values without bias at training points
        free = (alpha > ZERO_ALPHA) & (alpha < self.C - ZERO_ALPHA)
        if free.any():
            bias = float(np.mean(yf[free] - raw[free]))
        else:
            resid = yf - raw
            lower_set = ((yf > 0) & (alpha <= ZERO_ALPHA)) | ((yf < 0) & (alpha >= self.C - ZERO_ALPHA))
            upper_set = ((yf > 0) & (alpha >= self.C - ZERO_ALPHA)) | ((yf < 0) & (alpha <= ZERO_ALPHA))
            lo = np.max(resid[lower_set]) if lower_set.any() else -np.inf
            hi = np.min(resid[upper_set]) if upper_set.any() else np.inf
            if np.isinf(lo) and np.isinf(hi):
                bias = 0.0
            elif np.isinf(lo):
                bias = float(hi)
            elif np.isinf(hi):
                bias = float(lo)
            else:
                bias = float((lo + hi) / 2.0)

        keep = alpha > ZERO_ALPHA
        if not keep.any():
            keep = alpha > 0
        if not keep.any():
            raise RuntimeError("solver returned no support vectors")

        self.support_ = np.flatnonzero(keep)
        self.support_vectors_ = np.ascontiguousarray(X[keep])
        self.support_labels_ = y[keep].copy()
        self.alphas_ = alpha[keep].copy()
        self.intercept_ = bias
        self.dual_objective_ = float(alpha.sum() - 0.5 * (alpha @ (Q @ alpha)))
        self.classes_ = np.array([-1, 1])
        self.n_features_in_ = X.shape[1]
        self.n_iter_ = n_iter
        return self

    def decision_function(self, X):
        """Signed distance surrogate: sum_i alpha_i y_i K(sv_i, x) + b."""
        check_is_fitted(self, "alphas_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"input has {X.shape[1]} features but the model was trained "
                f"with {self.n_features_in_}"
            )
        K = kernel_matrix(X, self.support_vectors_, kernel=self.kernel, gamma=self.gamma)
        return K @ (self.alphas_ * self.support_labels_) + self.intercept_

    def predict(self, X):
        """Sign rule: +1 where the decision value is >= 0, else -1."""
        return np.where(self.decision_function(X) >= 0.0, 1, -1)
