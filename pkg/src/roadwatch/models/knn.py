"""Nearest-neighbour classifier (k = 1, Euclidean, on scaled features)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..features import FeatureVector, ScalerParams, fit_scaler


@dataclass(frozen=True)
class NearestNeighborModel:
    references: np.ndarray  # scaled, shape (m, 5)
    labels: np.ndarray
    scaler: ScalerParams

    kind = "knn"

    def __post_init__(self):
        if self.references.ndim != 2 or self.references.shape[0] < 1:
            raise ValueError("nearest-neighbour model needs at least one reference")
        if self.labels.shape != (self.references.shape[0],):
            raise ValueError("one label per reference required")
        self.references.setflags(write=False)
        self.labels.setflags(write=False)

    def predict(self, X) -> np.ndarray:
        """Hard 0/1 labels for unscaled rows of ``X``."""
        Z = self.scaler.apply(X)
        return self.labels[kernels.nearest_reference(Z, self.references)]

    # the loss sweep machinery works on scores; a hard label is a degenerate score
    score = predict


def knn_fit(X, y, scaler: ScalerParams | None = None) -> NearestNeighborModel:
    X = np.asarray(X, dtype=np.float64)
    if scaler is None:
        scaler = fit_scaler(X)
    return NearestNeighborModel(np.ascontiguousarray(scaler.apply(X)),
                                np.asarray(y, dtype=np.int64).copy(), scaler)


def knn_classify(model: NearestNeighborModel, x) -> int:
    if isinstance(x, FeatureVector):
        x = x.as_array()
    return int(model.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
