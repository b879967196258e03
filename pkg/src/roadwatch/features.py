"""Differential feature vectors and accident labels.

A feature vector compares two consecutive directional samples ``T`` and
``T+1`` of one (sensor, direction)::

    d_velocity        speed(T+1) - speed(T)                      km/h
    d_occupancy       occ(T+1) - occ(T)
    d_capacity_usage  (cap(T+1) - cap(T)) / bound, clamped to [-1, 1]
    weekday           1 Monday-Friday, 0 weekend     (local time of T+1)
    rush              time-of-day congestion score   (local time of T+1)

where ``cap = mean_count * mean_speed`` and ``bound`` is the per-key 99th
percentile of ``cap``. Differences are always later minus earlier, so a
sudden slowdown shows up as a negative ``d_velocity``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from ._time import SLOT_SECONDS, epoch_to_date, format_timestamp, parse_timestamp
from .ingest import MISSING, OK, PARTIAL, DirectionalSample, SAMPLES_HEADER

FEATURE_NAMES = ("d_velocity", "d_occupancy", "d_capacity_usage", "weekday", "rush")
N_FEATURES = len(FEATURE_NAMES)
N_SCALED = 3  # leading features that get standardised

DEFAULT_UTC_OFFSET_MIN = 180  # UTC+3, no DST
DEFAULT_WINDOW_MIN = 10
BOUND_PERCENTILE = 99
MIN_BOUND_SAMPLES = 100

VECTORS_HEADER = "sensor_id,direction,t_end,d_velocity,d_occupancy,d_capacity_usage,weekday,rush,label"
BOUNDS_HEADER = "sensor_id,direction,bound"

# knots of the rush-hour score, minutes past local midnight
_RUSH_KNOTS_X = (0, 300, 420, 570, 690, 960, 1020, 1170, 1380, 1440)
_RUSH_KNOTS_Y = (0.0, 0.0, 1.0, 1.0, 0.3, 0.3, 1.0, 1.0, 0.0, 0.0)


class FeatureVector(NamedTuple):
    sensor_id: str
    direction: int
    t_end: int
    d_velocity: float
    d_occupancy: float
    d_capacity_usage: float
    weekday: int
    rush: float
    label: int | None = None

    def as_array(self) -> np.ndarray:
        return np.array([self.d_velocity, self.d_occupancy, self.d_capacity_usage,
                         self.weekday, self.rush], dtype=np.float64)


class Event(NamedTuple):
    event_id: str
    timestamp: float
    sensor_id: str
    direction: int
    kind: str
    description: str = ""


def capacity(sample: DirectionalSample) -> float:
    """Road capacity proxy: cars per slot times their mean speed."""
    if sample.quality == MISSING or sample.mean_count is None or sample.mean_speed_kmh is None:
        raise ValueError(f"no capacity for missing sample at {format_timestamp(sample.timestamp)}")
    return sample.mean_count * sample.mean_speed_kmh


def nearest_rank(values, percentile=BOUND_PERCENTILE) -> float:
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    if ordered.size == 0:
        raise ValueError("percentile of an empty sample")
    rank = max(1, math.ceil(percentile / 100.0 * ordered.size))
    return float(ordered[rank - 1])


def capacity_bound(samples: Iterable[DirectionalSample], *, percentile=BOUND_PERCENTILE,
                   min_samples=MIN_BOUND_SAMPLES) -> dict[tuple[str, int], float]:
    """Per-(sensor, direction) nearest-rank percentile of capacity."""
    caps: dict[tuple[str, int], list[float]] = {}
    for s in samples:
        if s.quality == MISSING:
            caps.setdefault(s.key, [])
            continue
        caps.setdefault(s.key, []).append(capacity(s))
    return bounds_from_capacities(caps, percentile=percentile, min_samples=min_samples)


def bounds_from_capacities(caps, *, percentile=BOUND_PERCENTILE, min_samples=MIN_BOUND_SAMPLES):
    bounds = {}
    for key in sorted(caps):
        values = caps[key]
        if len(values) < min_samples:
            raise ValueError(f"capacity bound for {key[0]}/{key[1]} needs {min_samples} samples, "
                             f"got {len(values)}")
        b = nearest_rank(values, percentile)
        if not b > 0:
            raise ValueError(f"capacity bound for {key[0]}/{key[1]} is not positive")
        bounds[key] = b
    return bounds


def rush_hour_score(minute_of_day):
    """Piecewise-linear congestion score in [0, 1] for local clock minutes.

    0 overnight, 1 across 07:00-09:30 and 17:00-19:30, 0.3 through midday.
    """
    m = np.asarray(minute_of_day, dtype=np.float64)
    if np.any((m < 0) | (m >= 1440)) or np.any(np.isnan(m)):
        raise ValueError("minute of day must lie in [0, 1440)")
    out = np.interp(m, _RUSH_KNOTS_X, _RUSH_KNOTS_Y)
    return float(out) if out.ndim == 0 else out


def weekday_flag(day: date) -> int:
    return 1 if day.weekday() < 5 else 0


def local_calendar(epoch, utc_offset_min=DEFAULT_UTC_OFFSET_MIN):
    """``(weekday flag, rush score)`` for UTC instants in a fixed-offset zone."""
    local = np.asarray(epoch, dtype=np.int64) + utc_offset_min * 60
    days = np.floor_divide(local, 86400)
    minutes = (local - days * 86400) / 60.0
    weekday = (((days + 3) % 7) < 5).astype(np.int64)  # epoch day 0 was a Thursday
    return weekday, rush_hour_score(minutes)


def make_vector(s_T: DirectionalSample, s_T1: DirectionalSample, bound: float,
                utc_offset_min=DEFAULT_UTC_OFFSET_MIN) -> FeatureVector | None:
    """Difference two consecutive samples; ``None`` if either is missing."""
    if s_T.key != s_T1.key:
        raise ValueError(f"samples belong to different keys: {s_T.key} vs {s_T1.key}")
    if s_T1.timestamp - s_T.timestamp != SLOT_SECONDS:
        raise ValueError(f"samples are not consecutive slots: "
                         f"{format_timestamp(s_T.timestamp)} -> {format_timestamp(s_T1.timestamp)}")
    if s_T.quality == MISSING or s_T1.quality == MISSING:
        return None
    d_cap = (capacity(s_T1) - capacity(s_T)) / bound
    d_cap = min(1.0, max(-1.0, d_cap))
    local = s_T1.timestamp + utc_offset_min * 60
    weekday = weekday_flag(epoch_to_date(local))
    rush = rush_hour_score((local % 86400) / 60.0)
    return FeatureVector(
        s_T1.sensor_id, s_T1.direction, s_T1.timestamp,
        s_T1.mean_speed_kmh - s_T.mean_speed_kmh,
        s_T1.mean_occupancy - s_T.mean_occupancy,
        d_cap, weekday, rush,
    )


def label_vectors(vectors: Sequence[FeatureVector], events: Iterable[Event],
                  window_min=DEFAULT_WINDOW_MIN) -> list[FeatureVector]:
    """Label 1 when an event on the same key started at ``t_e`` with
    ``t_end`` in ``[t_e - 2 min, t_e + window]``."""
    by_key: dict[tuple[str, int], list[float]] = {}
    for e in events:
        by_key.setdefault((e.sensor_id, e.direction), []).append(e.timestamp)
    out = []
    for v in vectors:
        starts = by_key.get((v.sensor_id, v.direction), ())
        hit = any(t - SLOT_SECONDS <= v.t_end <= t + window_min * 60 for t in starts)
        out.append(v._replace(label=int(hit)))
    return out


# ---------------------------------------------------------------------------
# scaling

@dataclass(frozen=True)
class ScalerParams:
    mean: tuple[float, float, float]
    std: tuple[float, float, float]

    def apply(self, X) -> np.ndarray:
        """Standardise the three differential columns of an ``(n, 5)`` array."""
        X = np.array(X, dtype=np.float64, ndmin=2)
        if X.shape[1] != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} features, got {X.shape[1]}")
        X[:, :N_SCALED] = (X[:, :N_SCALED] - np.asarray(self.mean)) / np.asarray(self.std)
        return X


def fit_scaler(X) -> ScalerParams:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("fit_scaler needs at least 2 training vectors")
    cols = X[:, :N_SCALED]
    mean = cols.mean(axis=0)
    std = cols.std(axis=0)
    std = np.where(std < 1e-9, 1.0, std)
    return ScalerParams(tuple(float(v) for v in mean), tuple(float(v) for v in std))


def apply_scaler(params: ScalerParams, vector) -> np.ndarray:
    if isinstance(vector, FeatureVector):
        vector = vector.as_array()
    out = params.apply(vector)
    return out[0] if np.ndim(vector) == 1 else out


# ---------------------------------------------------------------------------
# columnar datasets

@dataclass
class SampleTable:
    """Directional samples as columns; ``key`` indexes into ``keys``."""

    keys: list
    key: np.ndarray
    timestamp: np.ndarray
    count: np.ndarray
    speed: np.ndarray
    occupancy: np.ndarray
    present: np.ndarray

    def capacities(self):
        return self.count * self.speed


def load_samples(path) -> SampleTable:
    key_ids: dict[tuple[str, int], int] = {}
    key, ts, cnt, spd, occ, present = [], [], [], [], [], []
    with open(path, encoding="ascii") as fh:
        if fh.readline().rstrip("\r\n") != SAMPLES_HEADER:
            raise ValueError(f"{path}: not a directional-sample file")
        nan = math.nan
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 8:
                if not line.strip():
                    continue
                raise ValueError(f"{path}: line {lineno}: expected 8 fields")
            k = (parts[1], int(parts[2]))
            kid = key_ids.get(k)
            if kid is None:
                kid = key_ids[k] = len(key_ids)
            key.append(kid)
            ts.append(parse_timestamp(parts[0]))
            quality = parts[7]
            if quality == MISSING:
                cnt.append(nan)
                spd.append(nan)
                occ.append(nan)
                present.append(False)
            elif quality in (OK, PARTIAL):
                cnt.append(float(parts[3]))
                spd.append(float(parts[4]))
                occ.append(float(parts[5]))
                present.append(True)
            else:
                raise ValueError(f"{path}: line {lineno}: unknown quality {quality!r}")
    keys = [None] * len(key_ids)
    for k, i in key_ids.items():
        keys[i] = k
    return SampleTable(keys, np.array(key, dtype=np.int64), np.array(ts, dtype=np.int64),
                       np.array(cnt), np.array(spd), np.array(occ), np.array(present, dtype=bool))


def table_bounds(table: SampleTable, **kwargs) -> dict[tuple[str, int], float]:
    caps = table.capacities()
    grouped = {}
    for i, k in enumerate(table.keys):
        sel = (table.key == i) & table.present
        grouped[k] = caps[sel]
    return bounds_from_capacities(grouped, **kwargs)


@dataclass
class VectorTable:
    """Feature vectors as columns: ``X`` is ``(n, 5)``; ``label`` may be -1 (unlabelled)."""

    keys: list
    key: np.ndarray
    t_end: np.ndarray
    X: np.ndarray
    label: np.ndarray

    def __len__(self):
        return self.X.shape[0]

    def subset(self, idx) -> "VectorTable":
        return VectorTable(self.keys, self.key[idx], self.t_end[idx], self.X[idx], self.label[idx])

    def rows(self):
        for i in range(len(self)):
            sid, d = self.keys[self.key[i]]
            x = self.X[i]
            yield FeatureVector(sid, d, int(self.t_end[i]), float(x[0]), float(x[1]), float(x[2]),
                                int(x[3]), float(x[4]), int(self.label[i]))


def build_vectors(table: SampleTable, bounds, utc_offset_min=DEFAULT_UTC_OFFSET_MIN) -> VectorTable:
    """Vectorised :func:`make_vector` over every consecutive present pair."""
    order = np.lexsort((table.timestamp, table.key))
    key = table.key[order]
    ts = table.timestamp[order]
    prev, nxt = slice(None, -1), slice(1, None)
    pair = ((key[prev] == key[nxt]) & (ts[nxt] - ts[prev] == SLOT_SECONDS)
            & table.present[order][prev] & table.present[order][nxt])
    i0 = order[:-1][pair]
    i1 = order[1:][pair]
    bound = np.array([bounds[k] for k in table.keys], dtype=np.float64)[table.key[i1]]
    caps = table.capacities()
    d_cap = np.clip((caps[i1] - caps[i0]) / bound, -1.0, 1.0)
    weekday, rush = local_calendar(table.timestamp[i1], utc_offset_min)
    X = np.column_stack([
        table.speed[i1] - table.speed[i0],
        table.occupancy[i1] - table.occupancy[i0],
        d_cap,
        weekday.astype(np.float64),
        rush,
    ])
    # deterministic output order: by t_end, then key
    out_order = np.lexsort((table.key[i1], table.timestamp[i1]))
    return VectorTable(list(table.keys), table.key[i1][out_order], table.timestamp[i1][out_order],
                       X[out_order], np.full(out_order.size, -1, dtype=np.int64))


def label_table(vectors: VectorTable, events: Iterable[Event], window_min=DEFAULT_WINDOW_MIN) -> VectorTable:
    label = np.zeros(len(vectors), dtype=np.int64)
    key_ids = {k: i for i, k in enumerate(vectors.keys)}
    for e in events:
        kid = key_ids.get((e.sensor_id, e.direction))
        if kid is None:
            continue
        hit = ((vectors.key == kid) & (vectors.t_end >= e.timestamp - SLOT_SECONDS)
               & (vectors.t_end <= e.timestamp + window_min * 60))
        label[hit] = 1
    return VectorTable(vectors.keys, vectors.key, vectors.t_end, vectors.X, label)


# ---------------------------------------------------------------------------
# text formats

def write_vectors(path, vectors: VectorTable):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(VECTORS_HEADER + "\n")
        names = [f"{sid},{d}," for sid, d in vectors.keys]
        ts_cache: dict[int, str] = {}
        chunk = []
        for k, t, x, y in zip(vectors.key.tolist(), vectors.t_end.tolist(), vectors.X.tolist(),
                              vectors.label.tolist()):
            ts = ts_cache.get(t)
            if ts is None:
                if len(ts_cache) > 4096:
                    ts_cache.clear()
                ts = ts_cache[t] = format_timestamp(t)
            chunk.append(f"{names[k]}{ts},{x[0]!r},{x[1]!r},{x[2]!r},{int(x[3])},{x[4]!r},"
                         f"{'' if y < 0 else y}")
            if len(chunk) >= 8192:
                fh.write("\n".join(chunk) + "\n")
                chunk.clear()
        if chunk:
            fh.write("\n".join(chunk) + "\n")


def load_vectors(path) -> VectorTable:
    key_ids: dict[tuple[str, int], int] = {}
    key, t_end, rows, label = [], [], [], []
    with open(path, encoding="ascii") as fh:
        if fh.readline().rstrip("\r\n") != VECTORS_HEADER:
            raise ValueError(f"{path}: not a feature-vector file")
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != 9:
                if not line.strip():
                    continue
                raise ValueError(f"{path}: line {lineno}: expected 9 fields")
            k = (parts[0], int(parts[1]))
            kid = key_ids.get(k)
            if kid is None:
                kid = key_ids[k] = len(key_ids)
            key.append(kid)
            t_end.append(parse_timestamp(parts[2]))
            rows.append((float(parts[3]), float(parts[4]), float(parts[5]),
                         float(parts[6]), float(parts[7])))
            label.append(int(parts[8]) if parts[8] else -1)
    keys = [None] * len(key_ids)
    for k, i in key_ids.items():
        keys[i] = k
    X = np.array(rows, dtype=np.float64).reshape(-1, N_FEATURES)
    return VectorTable(keys, np.array(key, dtype=np.int64), np.array(t_end, dtype=np.int64), X,
                       np.array(label, dtype=np.int64))


def parse_event(line: str) -> Event:
    parts = line.rstrip("\r\n").split(",", 5)
    if len(parts) < 5:
        raise ValueError(f"event line needs at least 5 fields: {line!r}")
    desc = parts[5] if len(parts) > 5 else ""
    if parts[3] not in ("0", "1"):
        raise ValueError(f"event direction must be 0 or 1: {line!r}")
    return Event(parts[0], parse_timestamp(parts[1]), parts[2], int(parts[3]), parts[4], desc)


def read_events(path) -> list[Event]:
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if lines and lines[0].startswith("event_id,"):
        lines = lines[1:]
    return [parse_event(line) for line in lines if line.strip()]


def write_bounds(path, bounds):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(BOUNDS_HEADER + "\n")
        for (sid, d), b in sorted(bounds.items()):
            fh.write(f"{sid},{d},{b!r}\n")


def read_bounds(path) -> dict[tuple[str, int], float]:
    with open(path, encoding="ascii") as fh:
        if fh.readline().rstrip("\r\n") != BOUNDS_HEADER:
            raise ValueError(f"{path}: not a capacity-bounds file")
        out = {}
        for line in fh:
            if line.strip():
                sid, d, b = line.rstrip("\n").split(",")
                out[(sid, int(d))] = float(b)
    return out
