"""Synthetic per-lane sensor readings and a matching incident log.

The generator stands in for a real detector archive. It produces one reading
per (sensor, direction, lane) every two minutes, following a weekday/weekend
diurnal profile, with incidents that knock speed down and push occupancy up,
plus a small rate of sensor faults (dropped rows, NULL fields, all-zero
readings).

Timing convention: a reading stamped ``T`` summarises the interval
``[T, T + 2 min)`` and reports the traffic state at the close of that
interval. Incident effects are therefore evaluated at ``T + 120 s``. They
are applied per lane to the already-jittered incident-free reading, so a
jammed lane's occupancy saturates instead of carrying the free-flow noise.

Randomness: ``numpy.random.SeedSequence(seed)`` is spawned into one child for
the incident schedule followed by one child per (sensor, direction) key in
``(sensor, direction)`` order; each child drives a ``PCG64`` generator. For
every simulated day and key, draws are consumed in this fixed order:

1. standard normals of shape ``(720, lanes)`` for count jitter,
2. standard normals of shape ``(720, lanes)`` for speed jitter,
3. uniforms of shape ``(720, lanes, 4)`` for faults, used as
   ``(drop, missing-field, which-field, obstruction)``.

Streams therefore match only within this implementation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from datetime import date
from typing import ClassVar, Iterator, NamedTuple

import numpy as np

from ._time import SLOT_SECONDS, SLOTS_PER_DAY, date_to_epoch, format_timestamp
from .ingest import RawLaneRecord

INCIDENT_KINDS = ("serious-accident", "minor-accident", "road-work", "handicapped-vehicle")
_KIND_WEIGHTS = (0.15, 0.55, 0.10, 0.20)

# occupancy an incident pushes towards as speed collapses
JAM_OCCUPANCY = 0.9

READINGS_HEADER = "timestamp,sensor_id,direction,lane,count,speed_kmh,occupancy"
EVENTS_HEADER = "event_id,timestamp,sensor_id,direction,kind,description"


class SimConfigError(ValueError):
    def __init__(self, param, reason):
        super().__init__(f"invalid simulator parameter {param}: {reason}")
        self.param = param


@dataclass(frozen=True)
class SimConfig:
    sensor_count: int = 7
    lanes_per_direction: int = 4
    start_date: date = date(2015, 1, 1)
    end_date: date = date(2016, 1, 1)  # exclusive
    free_flow_speed_kmh: float = 110.0
    speed_cap_kmh: float = 125.0
    # diurnal profile; flows are cars per 2 minutes per lane
    morning_peak_min: float = 480.0
    evening_peak_min: float = 1050.0
    peak_width_min: float = 70.0
    evening_peak_ratio: float = 0.6
    night_flow: float = 4.0
    day_flow: float = 30.0
    peak_flow: float = 60.0
    weekend_attenuation: float = 0.6
    rush_speed_drop_kmh: float = 50.0
    occupancy_coeff: float = 0.225
    noise_sigma: float = 0.08
    incident_count: int = 72
    incident_duration_min: tuple = (13.0, 20.0)
    incident_speed_drop: tuple = (0.1, 0.4)
    drop_rate: float = 0.001
    missing_field_rate: float = 0.002
    obstruction_rate: float = 0.0005
    seed: int = 42

    directions: ClassVar[int] = 2

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("sensor_count", "lanes_per_direction"):
            if getattr(self, name) < 1:
                raise SimConfigError(name, "must be a positive integer")
        if self.end_date <= self.start_date:
            raise SimConfigError("end_date", "must be after start_date")
        if self.free_flow_speed_kmh <= 0:
            raise SimConfigError("free_flow_speed_kmh", "must be positive")
        if self.free_flow_speed_kmh > self.speed_cap_kmh:
            raise SimConfigError("free_flow_speed_kmh", "exceeds speed_cap_kmh")
        if not 0.0 <= self.weekend_attenuation <= 1.0:
            raise SimConfigError("weekend_attenuation", "must lie in [0, 1]")
        if not 0.0 <= self.night_flow <= self.day_flow <= self.peak_flow or self.peak_flow <= 0:
            raise SimConfigError("peak_flow", "need 0 <= night_flow <= day_flow <= peak_flow, peak_flow > 0")
        if self.peak_width_min <= 0:
            raise SimConfigError("peak_width_min", "must be positive")
        if not 0.0 <= self.rush_speed_drop_kmh < self.free_flow_speed_kmh:
            raise SimConfigError("rush_speed_drop_kmh", "must lie in [0, free_flow_speed_kmh)")
        if self.occupancy_coeff <= 0:
            raise SimConfigError("occupancy_coeff", "must be positive")
        if self.noise_sigma < 0:
            raise SimConfigError("noise_sigma", "must be non-negative")
        if self.incident_count < 0:
            raise SimConfigError("incident_count", "must be non-negative")
        lo, hi = self.incident_duration_min
        if not 0 < lo <= hi:
            raise SimConfigError("incident_duration_min", "need 0 < low <= high")
        lo, hi = self.incident_speed_drop
        if not 0 < lo <= hi < 1:
            raise SimConfigError("incident_speed_drop", "need 0 < low <= high < 1")
        for name in ("drop_rate", "missing_field_rate", "obstruction_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SimConfigError(name, "probability must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise SimConfigError("seed", "must be a 64-bit unsigned integer")

    @property
    def days(self) -> int:
        return (self.end_date - self.start_date).days

    @property
    def keys(self) -> list[tuple[str, int]]:
        return [(sensor_name(s), d) for s in range(self.sensor_count) for d in range(self.directions)]

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


def sensor_name(index: int) -> str:
    return f"S{index + 1}"


class IncidentScript(NamedTuple):
    event_id: str
    start_time: int  # epoch seconds, not grid-aligned
    sensor_id: str
    direction: int
    kind: str
    duration_min: float
    speed_drop_factor: float


@dataclass
class FaultRates:
    drop: float = 0.0
    missing_field: float = 0.0
    obstruction: float = 0.0

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "FaultRates":
        return cls(cfg.drop_rate, cfg.missing_field_rate, cfg.obstruction_rate)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def diurnal_flow(minute_of_day, is_weekday, profile: SimConfig):
    """Expected (count, speed, occupancy) for one lane at a time of day.

    Works on scalars or arrays. Weekend flow is the weekday flow scaled by
    ``weekend_attenuation``; speed and occupancy then follow from the flow
    through the congestion map, so quieter weekends are also faster.
    """
    m = np.asarray(minute_of_day, dtype=np.float64)
    p = profile
    daytime = _sigmoid((m - 360.0) / 30.0) * _sigmoid((1320.0 - m) / 40.0)
    morning = np.exp(-0.5 * ((m - p.morning_peak_min) / p.peak_width_min) ** 2)
    evening = p.evening_peak_ratio * np.exp(-0.5 * ((m - p.evening_peak_min) / p.peak_width_min) ** 2)
    rush = np.maximum(morning, evening)
    flow = p.night_flow + (p.day_flow - p.night_flow) * daytime + (p.peak_flow - p.day_flow) * rush
    flow = np.where(is_weekday, flow, flow * p.weekend_attenuation)

    span = p.peak_flow - p.night_flow
    load = np.clip((flow - p.night_flow) / span, 0.0, 1.0) if span > 0 else np.zeros_like(flow)
    speed = np.clip(p.free_flow_speed_kmh - p.rush_speed_drop_kmh * load**2, 0.0, p.speed_cap_kmh)
    occupancy = np.clip(p.occupancy_coeff * flow / speed, 0.0, 1.0)
    if np.ndim(flow) == 0:
        return float(flow), float(speed), float(occupancy)
    return flow, speed, occupancy


def incident_factor(incident: IncidentScript, minutes_since_start):
    """Speed multiplier of an incident; 1 outside ``[0, duration)``."""
    t = np.asarray(minutes_since_start, dtype=np.float64)
    f = incident.speed_drop_factor
    ramp = f + (1.0 - f) * t / incident.duration_min
    g = np.where((t >= 0) & (t < incident.duration_min), ramp, 1.0)
    return float(g) if g.ndim == 0 else g


def apply_incident(baseline, incident: IncidentScript, minutes_since_start):
    """Perturb a (count, speed, occupancy) reading by an incident.

    Speed and count are multiplied by a factor ramping linearly from the
    incident's drop factor back to 1 over its duration. Occupancy moves
    towards ``JAM_OCCUPANCY`` in proportion to the speed drop.
    """
    count, speed, occupancy = baseline
    g = incident_factor(incident, minutes_since_start)
    occ = np.maximum(occupancy, occupancy + (JAM_OCCUPANCY - occupancy) * (1.0 - g))
    out = (count * g, speed * g, occ)
    if np.ndim(g) == 0:
        return tuple(float(v) for v in out)
    return out


def corrupt(record: RawLaneRecord, fault_rates: FaultRates, rng: np.random.Generator):
    """Inject sensor faults into one record.

    Consumes exactly four uniforms, ``(drop, missing, which-field, obstruction)``,
    regardless of outcome. Returns ``None`` when the record is dropped.
    """
    u = rng.random(4)
    if u[0] < fault_rates.drop:
        return None
    values = [record.vehicle_count, record.avg_speed_kmh, record.occupancy]
    if u[1] < fault_rates.missing_field:
        values[min(int(u[2] * 3), 2)] = None
    if u[3] < fault_rates.obstruction:
        values = [0, 0.0, 0.0]
    return record._replace(vehicle_count=values[0], avg_speed_kmh=values[1], occupancy=values[2])


def schedule_incidents(config: SimConfig, rng: np.random.Generator | None = None) -> list[IncidentScript]:
    """Place ``incident_count`` non-overlapping incidents over the range.

    Incidents on the same (sensor, direction) keep at least an hour of clear
    road between them. The log is sorted by start time.
    """
    if rng is None:
        rng = _streams(config)[0]
    keys = config.keys
    t0 = date_to_epoch(config.start_date)
    t1 = date_to_epoch(config.end_date)
    lo_d, hi_d = config.incident_duration_min
    lo_f, hi_f = config.incident_speed_drop
    earliest = t0 + 3600
    latest = t1 - 3600 - int(np.ceil(hi_d * 60))
    if config.incident_count and latest <= earliest:
        raise SimConfigError("incident_count", "simulation range too short for incidents")
    margin = 3600
    taken: dict[tuple[str, int], list[tuple[int, int]]] = {}
    drafts = []
    attempts = 0
    while len(drafts) < config.incident_count:
        attempts += 1
        if attempts > 1000 * max(config.incident_count, 1):
            raise SimConfigError("incident_count", "cannot place incidents without overlap")
        k = int(rng.integers(len(keys)))
        start = int(rng.integers(earliest, latest))
        duration = round(float(rng.uniform(lo_d, hi_d)), 1)
        drop = round(float(rng.uniform(lo_f, hi_f)), 3)
        kind = INCIDENT_KINDS[int(rng.choice(len(INCIDENT_KINDS), p=_KIND_WEIGHTS))]
        end = start + int(np.ceil(duration * 60))
        spans = taken.setdefault(keys[k], [])
        if any(start < e + margin and s < end + margin for s, e in spans):
            continue
        spans.append((start, end))
        drafts.append((start, keys[k], kind, duration, drop))
    drafts.sort(key=lambda d: (d[0], d[1]))
    return [
        IncidentScript(f"E{i + 1:04d}", start, key[0], key[1], kind, duration, drop)
        for i, (start, key, kind, duration, drop) in enumerate(drafts)
    ]


def _streams(config: SimConfig) -> list[np.random.Generator]:
    children = np.random.SeedSequence(config.seed).spawn(1 + len(config.keys))
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


@dataclass
class DayBlock:
    """One simulated day, indexed ``[slot, key, lane]`` in output order.

    Missing fields are NaN; ``kept`` is False for dropped records.
    """

    slot_times: np.ndarray
    count: np.ndarray
    speed: np.ndarray
    occupancy: np.ndarray
    kept: np.ndarray
    keys: list = field(default_factory=list)


def simulate_days(config: SimConfig, incidents: list[IncidentScript] | None = None) -> Iterator[DayBlock]:
    streams = _streams(config)
    if incidents is None:
        incidents = schedule_incidents(config, streams[0])
    keys = config.keys
    key_index = {k: i for i, k in enumerate(keys)}
    lanes = config.lanes_per_direction
    rates = FaultRates.from_config(config)
    sigma = config.noise_sigma
    t0 = date_to_epoch(config.start_date)
    minutes = np.arange(SLOTS_PER_DAY) * (SLOT_SECONDS / 60)
    profiles = {wd: diurnal_flow(minutes, wd, config) for wd in (True, False)}

    by_key: dict[int, list[IncidentScript]] = {}
    for inc in incidents:
        by_key.setdefault(key_index[(inc.sensor_id, inc.direction)], []).append(inc)

    for day in range(config.days):
        day_start = t0 + day * 86400
        slot_times = day_start + SLOT_SECONDS * np.arange(SLOTS_PER_DAY, dtype=np.int64)
        weekday = ((day_start // 86400) + 3) % 7 < 5  # 1970-01-01 was a Thursday
        base_c, base_s, base_o = profiles[bool(weekday)]
        shape = (SLOTS_PER_DAY, len(keys), lanes)
        count = np.empty(shape)
        speed = np.empty(shape)
        occ = np.empty(shape)
        kept = np.empty(shape, dtype=bool)
        for k in range(len(keys)):
            rng = streams[1 + k]
            z_count = rng.standard_normal((SLOTS_PER_DAY, lanes))
            z_speed = rng.standard_normal((SLOTS_PER_DAY, lanes))
            u = rng.random((SLOTS_PER_DAY, lanes, 4))

            jc = np.exp(sigma * z_count)
            js = np.exp(sigma * z_speed)
            lane_count = base_c[:, None] * jc
            lane_speed = np.minimum(base_s[:, None] * js, config.speed_cap_kmh)
            lane_occ = np.clip(base_o[:, None] * jc / js, 0.0, 1.0)

            close = (slot_times + SLOT_SECONDS).astype(np.float64)
            for inc in by_key.get(k, ()):
                t = (close - inc.start_time) / 60.0
                if not ((t >= 0) & (t < inc.duration_min)).any():
                    continue
                lane_count, lane_speed, lane_occ = apply_incident(
                    (lane_count, lane_speed, lane_occ), inc, t[:, None])

            lane_count = np.rint(lane_count)
            lane_speed = np.round(lane_speed, 1)
            lane_occ = np.round(lane_occ, 3)

            # faults, same semantics as corrupt()
            drop = u[..., 0] < rates.drop
            missing = u[..., 1] < rates.missing_field
            which = np.minimum((u[..., 2] * 3).astype(np.int64), 2)
            lane_count[missing & (which == 0)] = np.nan
            lane_speed[missing & (which == 1)] = np.nan
            lane_occ[missing & (which == 2)] = np.nan
            blocked = u[..., 3] < rates.obstruction
            lane_count[blocked] = 0.0
            lane_speed[blocked] = 0.0
            lane_occ[blocked] = 0.0

            count[:, k] = lane_count
            speed[:, k] = lane_speed
            occ[:, k] = lane_occ
            kept[:, k] = ~drop
        yield DayBlock(slot_times, count, speed, occ, kept, keys)


def simulate(config: SimConfig) -> tuple[Iterator[RawLaneRecord], list[IncidentScript]]:
    """Record stream (timestamp, sensor, direction, lane order) and event log."""
    incidents = schedule_incidents(config)

    def records():
        for block in simulate_days(config, incidents):
            yield from _block_records(block)

    return records(), incidents


def _nan_to_none(v, cast):
    return None if v != v else cast(v)


def _block_records(block: DayBlock) -> Iterator[RawLaneRecord]:
    n_slots, n_keys, n_lanes = block.count.shape
    for i in range(n_slots):
        ts = int(block.slot_times[i])
        for k in range(n_keys):
            sid, d = block.keys[k]
            for lane in range(n_lanes):
                if not block.kept[i, k, lane]:
                    continue
                yield RawLaneRecord(
                    ts, sid, d, lane,
                    _nan_to_none(block.count[i, k, lane], int),
                    _nan_to_none(block.speed[i, k, lane], float),
                    _nan_to_none(block.occupancy[i, k, lane], float),
                )


def _format_value(v, spec):
    return "NULL" if v != v else format(v, spec)


def format_block(block: DayBlock) -> str:
    """Render a day block as reading lines (no header), newline-terminated."""
    n_slots, n_keys, n_lanes = block.count.shape
    prefixes = [f"{sid},{d},{lane},"
                for sid, d in block.keys for lane in range(n_lanes)]
    count = block.count.reshape(n_slots, -1)
    speed = block.speed.reshape(n_slots, -1)
    occ = block.occupancy.reshape(n_slots, -1)
    kept = block.kept.reshape(n_slots, -1)
    broken = np.isnan(count) | np.isnan(speed) | np.isnan(occ)
    lines = []
    append = lines.append
    for i in range(n_slots):
        ts = format_timestamp(int(block.slot_times[i])) + ","
        rows = zip(prefixes, count[i].tolist(), speed[i].tolist(), occ[i].tolist(),
                   kept[i].tolist(), broken[i].tolist())
        for prefix, c, s, o, keep, bad in rows:
            if not keep:
                continue
            if bad:
                append(f"{ts}{prefix}{_format_value(c, '.0f')},"
                       f"{_format_value(s, '.1f')},{_format_value(o, '.3f')}")
            else:
                append("%s%s%d,%.1f,%.3f" % (ts, prefix, c, s, o))
    if not lines:
        return ""
    return "\n".join(lines) + "\n"


def format_event(inc: IncidentScript) -> str:
    desc = f"{inc.kind.replace('-', ' ')} duration_min={inc.duration_min} speed_drop={inc.speed_drop_factor}"
    return ",".join([inc.event_id, format_timestamp(inc.start_time), inc.sensor_id,
                     str(inc.direction), inc.kind, desc])


def write_outputs(config: SimConfig, readings_path, events_path) -> tuple[int, list[IncidentScript]]:
    """Write the readings and event-log files; returns (rows written, incidents)."""
    incidents = schedule_incidents(config)
    rows = 0
    with open(readings_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(READINGS_HEADER + "\n")
        for block in simulate_days(config, incidents):
            fh.write(format_block(block))
            rows += int(block.kept.sum())
    with open(events_path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(EVENTS_HEADER + "\n")
        for inc in incidents:
            fh.write(format_event(inc) + "\n")
    return rows, incidents
