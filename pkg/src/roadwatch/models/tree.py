"""Binary regression tree grown by greedy Gini/variance reduction.

The tree regresses the 0/1 label, so each leaf stores the fraction of
positive training samples that reached it; that fraction is the score.
Impurity of a node with positive fraction ``p`` is ``p * (1 - p)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..features import FeatureVector, N_FEATURES, ScalerParams, fit_scaler


def impurity(labels) -> float:
    y = np.asarray(labels, dtype=np.float64)
    if y.size == 0:
        raise ValueError("impurity of an empty label set")
    p = y.mean()
    return float(p * (1.0 - p))


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float


def best_split(X, y, *, min_gain=1e-6, min_leaf=1) -> Split | None:
    """Exhaustive search over every feature and every midpoint between
    consecutive distinct values.

    Rows with ``x[feature] < threshold`` go left. Near-equal gains resolve to
    the lower feature index, then the lower threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if n < 2:
        return None
    parent = impurity(y)
    best = None
    best_score = np.inf
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        i, score = kernels.split_scan(xs, y[order], min_leaf)
        if i < 0:
            continue
        # strictly better beyond the tie tolerance, else keep the earlier feature
        if best is None or score < best_score - kernels.TIE_EPS * max(1.0, abs(best_score)):
            lo, hi = xs[i], xs[i + 1]
            mid = (lo + hi) / 2.0
            best = (f, mid if lo < mid else hi)
            best_score = score
    if best is None:
        return None
    gain = parent - best_score / n
    if gain < min_gain:
        return None
    return Split(best[0], float(best[1]), float(gain))


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 8
    min_leaf: int = 2
    min_gain: float = 1e-6

    def __post_init__(self):
        if self.max_depth < 0 or self.min_leaf < 1 or self.min_gain < 0:
            raise ValueError("tree parameters out of range")


@dataclass(frozen=True)
class RegressionTreeModel:
    """Nodes in preorder; ``feature[i] < 0`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    params: TreeParams
    scaler: ScalerParams

    kind = "tree"

    def __post_init__(self):
        for arr in (self.feature, self.threshold, self.left, self.right, self.value, self.n_samples):
            arr.setflags(write=False)

    @property
    def n_nodes(self):
        return self.feature.size

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def score(self, X) -> np.ndarray:
        Z = self.scaler.apply(X)
        return kernels.tree_apply(Z, self.feature, self.threshold, self.left, self.right, self.value)


def tree_fit(X, y, params: TreeParams = TreeParams(), scaler: ScalerParams | None = None) -> RegressionTreeModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("tree_fit needs a non-empty training set")
    if scaler is None:
        scaler = fit_scaler(X) if y.size >= 2 else ScalerParams((0.0,) * 3, (1.0,) * 3)
    Z = scaler.apply(X)
    nodes: list[list] = []  # [feature, threshold, left, right, value, n]

    def grow(idx, depth):
        me = len(nodes)
        nodes.append([-1, 0.0, -1, -1, float(y[idx].mean()), int(idx.size)])
        if depth >= params.max_depth or idx.size < 2 * params.min_leaf:
            return me
        s = best_split(Z[idx], y[idx], min_gain=params.min_gain, min_leaf=params.min_leaf)
        if s is None:
            return me
        go_left = Z[idx, s.feature] < s.threshold
        nodes[me][0] = s.feature
        nodes[me][1] = s.threshold
        nodes[me][2] = grow(idx[go_left], depth + 1)
        nodes[me][3] = grow(idx[~go_left], depth + 1)
        return me

    grow(np.arange(y.size), 0)
    cols = list(zip(*nodes))
    return RegressionTreeModel(
        np.array(cols[0], dtype=np.int64), np.array(cols[1], dtype=np.float64),
        np.array(cols[2], dtype=np.int64), np.array(cols[3], dtype=np.int64),
        np.array(cols[4], dtype=np.float64), np.array(cols[5], dtype=np.int64),
        params, scaler,
    )


def tree_score(model: RegressionTreeModel, x) -> float:
    if isinstance(x, FeatureVector):
        x = x.as_array()
    return float(model.score(np.asarray(x, dtype=np.float64).reshape(1, N_FEATURES))[0])
