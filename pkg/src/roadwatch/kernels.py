"""Hot numeric loops used by the classifiers.

Every kernel exists twice: a loop-style version compiled with numba and a
vectorised pure-numpy version. Both are written to perform the same floating
point operations in the same order, so they return identical results; the
test-suite checks this directly.

Set ``ROADWATCH_NUMBA=0`` in the environment to force the numpy path (for
example on platforms where numba is unavailable). The choice is made once,
at import time.
"""

import os

import numpy as np

_flag = os.environ.get("ROADWATCH_NUMBA", "1").strip().lower()
USE_NUMBA = _flag not in ("0", "false", "no", "off")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - depends on environment
        USE_NUMBA = False

if not USE_NUMBA:

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


# Relative slack when comparing split scores; candidates within it are ties.
TIE_EPS = 1e-12


# --------------------------------------------------------------------------
# nearest reference (1-NN, squared Euclidean, lowest index wins ties)

@njit(cache=True)
def _nearest_reference_numba(queries, refs):
    n, d = queries.shape
    m = refs.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = np.inf
        arg = 0
        for j in range(m):
            dist = 0.0
            for k in range(d):
                diff = queries[i, k] - refs[j, k]
                dist += diff * diff
            if dist < best:
                best = dist
                arg = j
        out[i] = arg
    return out


def _nearest_reference_numpy(queries, refs, chunk=65536):
    n, d = queries.shape
    out = np.empty(n, dtype=np.int64)
    for start in range(0, n, chunk):
        q = queries[start:start + chunk]
        # accumulate feature by feature to mirror the loop's summation order
        dist = np.zeros((q.shape[0], refs.shape[0]))
        for k in range(d):
            diff = q[:, k:k + 1] - refs[:, k][None, :]
            dist += diff * diff
        out[start:start + chunk] = np.argmin(dist, axis=1)
    return out


def nearest_reference(queries, refs):
    """Index of the nearest row of ``refs`` for every row of ``queries``."""
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    refs = np.ascontiguousarray(refs, dtype=np.float64)
    if USE_NUMBA:
        return _nearest_reference_numba(queries, refs)
    return _nearest_reference_numpy(queries, refs)


# --------------------------------------------------------------------------
# tree traversal

@njit(cache=True)
def _tree_apply_numba(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def _tree_apply_numpy(X, feature, threshold, left, right, value):
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        idx = rows[active]
        nd = node[idx]
        go_left = X[idx, feature[nd]] < threshold[nd]
        node[idx] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return value[node]


def tree_apply(X, feature, threshold, left, right, value):
    """Leaf value reached by each row of ``X`` (``feature < 0`` marks a leaf)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    args = (
        np.ascontiguousarray(feature, dtype=np.int64),
        np.ascontiguousarray(threshold, dtype=np.float64),
        np.ascontiguousarray(left, dtype=np.int64),
        np.ascontiguousarray(right, dtype=np.int64),
        np.ascontiguousarray(value, dtype=np.float64),
    )
    if USE_NUMBA:
        return _tree_apply_numba(X, *args)
    return _tree_apply_numpy(X, *args)


# --------------------------------------------------------------------------
# split scan over one feature
#
# Input is sorted by value. For a cut between positions i and i+1 the score is
#   W = posL*negL/nL + posR*negR/nR
# which is n times the weighted child impurity; smaller is better.

@njit(cache=True)
def _split_scan_numba(xs, ys, min_leaf):
    n = xs.shape[0]
    total_pos = 0.0
    for i in range(n):
        total_pos += ys[i]
    scores = np.full(n - 1, np.inf)
    pos_left = 0.0
    for i in range(n - 1):
        pos_left += ys[i]
        n_left = i + 1
        n_right = n - n_left
        if xs[i] == xs[i + 1] or n_left < min_leaf or n_right < min_leaf:
            continue
        pos_right = total_pos - pos_left
        w_left = pos_left * (n_left - pos_left) / n_left
        w_right = pos_right * (n_right - pos_right) / n_right
        scores[i] = w_left + w_right
    best = np.inf
    for i in range(n - 1):
        if scores[i] < best:
            best = scores[i]
    if best == np.inf:
        return -1, np.inf
    limit = best + TIE_EPS * max(1.0, abs(best))
    for i in range(n - 1):
        if scores[i] <= limit:
            return i, scores[i]
    return -1, np.inf  # unreachable


def _split_scan_numpy(xs, ys, min_leaf):
    n = xs.shape[0]
    pos_left = np.cumsum(ys)[:-1]
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    pos_right = ys.sum() - pos_left
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = (pos_left * (n_left - pos_left) / n_left
                  + pos_right * (n_right - pos_right) / n_right)
    ok = (xs[:-1] != xs[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    scores = np.where(ok, scores, np.inf)
    if not ok.any():
        return -1, np.inf
    best = scores.min()
    limit = best + TIE_EPS * max(1.0, abs(best))
    i = int(np.flatnonzero(scores <= limit)[0])
    return i, float(scores[i])


def split_scan(xs, ys, min_leaf=1):
    """Best cut position in a sorted column.

    Returns ``(i, score)`` meaning "cut between ``xs[i]`` and ``xs[i+1]``",
    or ``(-1, inf)`` when no admissible cut exists. Near-ties resolve to the
    lowest position.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    if xs.shape[0] < 2:
        return -1, np.inf
    if USE_NUMBA:
        i, s = _split_scan_numba(xs, ys, min_leaf)
        return int(i), float(s)
    return _split_scan_numpy(xs, ys, min_leaf)
