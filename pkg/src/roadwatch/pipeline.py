"""Train/evaluate orchestration and the streaming detector."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from ._time import SLOT_SECONDS, format_timestamp
from .evaluation import SweepRow, sweep
from .features import DEFAULT_UTC_OFFSET_MIN, VectorTable, make_vector
from .ingest import (SNAP_TOLERANCE_S, CleaningSummary, DirectionalAverager, DirectionalSample,
                     LaneCounts, ParseError, RecordRejected, parse_line, validate)
from .models import (NetHyper, SplitSpec, TreeParams, knn_fit, net_fit, split, tree_fit)
from .models.threshold import decide, threshold


def train_model(vectors: VectorTable, kind: str, spec: SplitSpec, *, tree_params=TreeParams(),
                hidden=10, hyper=NetHyper(), net_seed=42):
    """Split ``vectors`` per ``spec`` and fit one model on the training part."""
    train, cv, _ = split(vectors.label, spec)
    X, y = vectors.X[train], vectors.label[train]
    if kind == "knn":
        return knn_fit(X, y)
    if kind == "tree":
        return tree_fit(X, y, tree_params)
    if kind == "net":
        if cv.size == 0:
            raise ValueError("the network needs a validation split (cv_total > 0)")
        return net_fit(X, y, vectors.X[cv], vectors.label[cv], hidden, hyper, net_seed)
    raise ValueError(f"unknown model kind {kind!r}")


def horizon_days(vectors: VectorTable) -> float:
    if len(vectors) == 0:
        raise ValueError("no vectors to span a horizon")
    return float(vectors.t_end.max() - vectors.t_end.min() + SLOT_SECONDS) / 86400.0


def holdout_partition(vectors: VectorTable, spec: SplitSpec | None) -> VectorTable:
    if spec is None:
        return vectors
    _, _, test = split(vectors.label, spec)
    return vectors.subset(test)


def evaluate_model(model, vectors: VectorTable, losses: Iterable[float],
                   horizon: float | None = None) -> list[SweepRow]:
    losses = list(losses)
    if model.kind == "knn" and any(loss != 0 for loss in losses):
        raise ValueError("the nearest-neighbour model emits hard labels; only loss 0 applies")
    if np.any(vectors.label < 0):
        raise ValueError("evaluation needs labelled vectors")
    scores = model.score(vectors.X)
    if horizon is None:
        horizon = horizon_days(vectors)
    return sweep(scores, vectors.label, losses, horizon)


class Alert(NamedTuple):
    timestamp: int
    sensor_id: str
    direction: int
    model: str
    score: float
    loss: float
    decision: int = 1

    def format(self) -> str:
        return (f"{format_timestamp(self.timestamp)},{self.sensor_id},{self.direction},"
                f"{self.model},{self.score!r},{self.loss!r},{self.decision}")


ALERT_FIELDS = "timestamp,sensor_id,direction,model,score,loss,decision"


@dataclass
class DetectStats:
    vectors: int = 0
    alerts: int = 0
    no_bound: int = 0


class StreamDetector:
    """Score readings as they arrive.

    Lanes are averaged per slot; a slot closes when the first reading of a
    later slot for the same key arrives (or at :meth:`finish`). Each closed
    slot is differenced against the previous one, scored, and turned into an
    :class:`Alert` when the loss-biased decision is positive. State is one
    open slot and one previous sample per key.
    """

    def __init__(self, model, bounds, loss=0.0, lane_counts: LaneCounts | None = None,
                 utc_offset_min=DEFAULT_UTC_OFFSET_MIN, tolerance_s=SNAP_TOLERANCE_S):
        if model.kind == "knn" and loss != 0:
            raise ValueError("the nearest-neighbour model emits hard labels; only loss 0 applies")
        threshold(loss)  # validates
        self.model = model
        self.bounds = bounds
        self.loss = loss
        self.utc_offset_min = utc_offset_min
        self.tolerance_s = tolerance_s
        self.summary = CleaningSummary()
        self.stats = DetectStats()
        self._previous: dict[tuple[str, int], DirectionalSample] = {}
        self._pending: list[Alert] = []
        self._averager = DirectionalAverager(lane_counts or LaneCounts(), self._on_sample, self.summary)
        self._lineno = 0

    def _on_sample(self, sample: DirectionalSample):
        key = sample.key
        prev = self._previous.get(key)
        self._previous[key] = sample
        if prev is None or sample.timestamp - prev.timestamp != SLOT_SECONDS:
            return
        bound = self.bounds.get(key)
        if bound is None:
            self.stats.no_bound += 1
            return
        vec = make_vector(prev, sample, bound, self.utc_offset_min)
        if vec is None:
            return
        self.stats.vectors += 1
        score = float(self.model.score(vec.as_array().reshape(1, -1))[0])
        if decide(score, self.loss):
            self.stats.alerts += 1
            self._pending.append(Alert(sample.timestamp, key[0], key[1], self.model.kind,
                                       score, self.loss))

    def _drain(self):
        out, self._pending = self._pending, []
        return out

    def feed(self, line: str) -> list[Alert]:
        self._lineno += 1
        if self._lineno == 1 and line.startswith("timestamp,"):
            return []
        s = self.summary
        s.lines += 1
        try:
            rec = validate(parse_line(line, self._lineno), self.tolerance_s)
        except ParseError:
            s.rejected["parse-error"] += 1
            return []
        except RecordRejected as exc:
            s.rejected[exc.reason] += 1
            return []
        self._averager.add(rec)
        return self._drain()

    def finish(self) -> list[Alert]:
        self._averager.finish()
        return self._drain()
