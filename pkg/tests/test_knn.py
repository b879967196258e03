import numpy as np
import pytest
from hypothesis import given, strategies as st

from roadwatch.features import FeatureVector, ScalerParams, fit_scaler
from roadwatch.models import knn_classify, knn_fit

IDENTITY = ScalerParams((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


def brute_force(model, x):
    """Exhaustive scan in plain Python; first minimum wins."""
    z = model.scaler.apply(np.asarray(x, dtype=float).reshape(1, -1))[0]
    best, arg = None, None
    for j, ref in enumerate(model.references):
        d = 0.0
        for k in range(len(z)):
            d += (z[k] - ref[k]) ** 2
        if best is None or d < best:
            best, arg = d, j
    return int(model.labels[arg])


def test_query_equal_to_reference():
    X = np.array([[1.0, 0.1, 0.0, 1, 0.5], [-30.0, 0.4, -0.5, 1, 1.0], [2.0, 0.0, 0.1, 0, 0.0]])
    model = knn_fit(X, [0, 1, 0])
    for x, y in zip(X, [0, 1, 0]):
        assert knn_classify(model, x) == y


def test_single_reference():
    model = knn_fit(np.array([[5.0, 0.2, 0.1, 1, 0.3]]), [1], scaler=IDENTITY)
    for x in np.random.default_rng(0).normal(size=(20, 5)):
        assert knn_classify(model, x) == 1


def test_tie_goes_to_first_reference():
    X = np.array([[1.0, 0, 0, 0, 0], [-1.0, 0, 0, 0, 0]])
    model = knn_fit(X, [1, 0], scaler=IDENTITY)
    assert knn_classify(model, np.zeros(5)) == 1
    model = knn_fit(X[::-1], [0, 1], scaler=IDENTITY)
    assert knn_classify(model, np.zeros(5)) == 0


def test_accepts_feature_vector():
    model = knn_fit(np.array([[0.0] * 5, [10.0, 0, 0, 0, 0]]), [0, 1], scaler=IDENTITY)
    v = FeatureVector("S1", 0, 0, 9.0, 0.0, 0.0, 0, 0.0)
    assert knn_classify(model, v) == 1


def test_oracle_thousand_queries():
    r = np.random.default_rng(2024)
    X = np.column_stack([r.normal(0, 15, 130), r.normal(0, 0.1, 130), r.uniform(-1, 1, 130),
                         r.integers(0, 2, 130), r.uniform(0, 1, 130)])
    y = r.integers(0, 2, 130)
    model = knn_fit(X, y)
    Q = np.column_stack([r.normal(0, 15, 1000), r.normal(0, 0.1, 1000), r.uniform(-1, 1, 1000),
                         r.integers(0, 2, 1000), r.uniform(0, 1, 1000)])
    got = model.predict(Q)
    assert got.tolist() == [brute_force(model, q) for q in Q]


def test_references_immutable():
    model = knn_fit(np.eye(5)[:3], [0, 1, 0])
    with pytest.raises(ValueError):
        model.references[0, 0] = 9.0
    with pytest.raises(Exception):
        model.scaler = IDENTITY


@given(st.integers(0, 2**32 - 1))
def test_far_reference_does_not_change_answer(seed):
    r = np.random.default_rng(seed)
    X = r.integers(-3, 4, size=(12, 5)).astype(float)
    y = r.integers(0, 2, 12)
    x = r.integers(-3, 4, size=5).astype(float)
    sc = fit_scaler(X)
    base = knn_fit(X, y, scaler=sc)
    z = sc.apply(x)[0]
    nearest = np.min(((base.references - z) ** 2).sum(axis=1))
    # a reference strictly farther than the current nearest, with the opposite label
    far = x.copy()
    far[0] += (np.sqrt(nearest) + 1.0) * sc.std[0]
    grown = knn_fit(np.vstack([X, far]), np.append(y, 1 - knn_classify(base, x)), scaler=sc)
    assert knn_classify(grown, x) == knn_classify(base, x)
