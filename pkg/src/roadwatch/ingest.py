"""Single-pass cleaning and lane averaging of raw sensor readings.

Input lines look like::

    timestamp,sensor_id,direction,lane,count,speed_kmh,occupancy
    2015-03-02T08:06:00Z,S3,0,2,113,108.4,0.31

An empty field or the literal ``NULL`` means missing. Output is one
:class:`DirectionalSample` per (sensor, direction, 2-minute slot) with gaps
filled by ``missing`` placeholders.

The streaming pipeline closes a key's slot as soon as a reading for a later
slot of that key arrives, so memory is bounded by the number of keys and
lanes, not by the length of the input. Readings for an already-closed slot
are rejected as ``out-of-order``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, NamedTuple

from ._time import SLOT_SECONDS, format_timestamp, parse_timestamp

SAMPLES_HEADER = "timestamp,sensor_id,direction,mean_count,mean_speed_kmh,mean_occupancy,valid_lanes,quality"

MAX_SPEED_KMH = 250.0
MAX_COUNT = 1000
SNAP_TOLERANCE_S = 60

OK, PARTIAL, MISSING = "ok", "partial", "missing"

REJECT_REASONS = (
    "parse-error",
    "out-of-range-occupancy",
    "out-of-range-speed",
    "out-of-range-count",
    "off-grid",
    "unknown-lane",
    "out-of-order",
    "outside-range",
)


class RawLaneRecord(NamedTuple):
    timestamp: float
    sensor_id: str
    direction: int
    lane: int
    vehicle_count: int | None
    avg_speed_kmh: float | None
    occupancy: float | None


class CleanLaneRecord(NamedTuple):
    timestamp: int  # on the 2-minute grid
    sensor_id: str
    direction: int
    lane: int
    vehicle_count: int | None
    avg_speed_kmh: float | None
    occupancy: float | None
    note: str | None = None  # "dead-lane" when an all-zero reading was blanked


class DirectionalSample(NamedTuple):
    sensor_id: str
    direction: int
    timestamp: int
    mean_count: float | None
    mean_speed_kmh: float | None
    mean_occupancy: float | None
    valid_lanes: int
    quality: str

    @property
    def key(self):
        return self.sensor_id, self.direction


class ParseError(ValueError):
    def __init__(self, reason, lineno=None):
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + reason)
        self.reason = reason
        self.lineno = lineno


class RecordRejected(ValueError):
    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


def _count_field(text, lineno):
    if text == "" or text == "NULL":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric count {text!r}", lineno) from None
    if not value.is_integer():
        raise ParseError(f"non-integer count {text!r}", lineno)
    return int(value)


def _real_field(text, name, lineno):
    if text == "" or text == "NULL":
        return None
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"non-numeric {name} {text!r}", lineno) from None


def parse_line(line: str, lineno: int | None = None) -> RawLaneRecord:
    parts = line.rstrip("\r\n").split(",")
    if len(parts) != 7:
        raise ParseError(f"expected 7 fields, got {len(parts)}", lineno)
    ts_text, sensor, direction, lane, count, speed, occ = parts
    try:
        ts = parse_timestamp(ts_text.strip())
    except ValueError:
        raise ParseError(f"unparseable timestamp {ts_text!r}", lineno) from None
    if not sensor:
        raise ParseError("empty sensor_id", lineno)
    if direction not in ("0", "1"):
        raise ParseError(f"direction must be 0 or 1, got {direction!r}", lineno)
    try:
        lane_no = int(lane)
    except ValueError:
        raise ParseError(f"non-numeric lane {lane!r}", lineno) from None
    if lane_no < 0:
        raise ParseError(f"negative lane {lane_no}", lineno)
    return RawLaneRecord(
        ts, sensor, int(direction), lane_no,
        _count_field(count, lineno),
        _real_field(speed, "speed", lineno),
        _real_field(occ, "occupancy", lineno),
    )


def snap_to_grid(ts, tolerance_s=SNAP_TOLERANCE_S):
    """Nearest 2-minute grid instant, or ``None`` if further than ``tolerance_s``.

    An instant exactly half-way between grid points snaps to the earlier one.
    """
    r = ts % SLOT_SECONDS
    snapped = ts - r if r <= SLOT_SECONDS / 2 else ts - r + SLOT_SECONDS
    if abs(ts - snapped) > tolerance_s:
        return None
    return int(snapped)


def validate(raw: RawLaneRecord, tolerance_s=SNAP_TOLERANCE_S) -> CleanLaneRecord:
    """Snap to the grid and check field domains.

    Raises :class:`RecordRejected` for out-of-domain values. An all-zero
    triple is treated as a dead or obstructed lane: it is accepted with every
    measurement blanked and ``note="dead-lane"``.
    """
    snapped = snap_to_grid(raw.timestamp, tolerance_s)
    if snapped is None:
        raise RecordRejected("off-grid")
    c, s, o = raw.vehicle_count, raw.avg_speed_kmh, raw.occupancy
    if o is not None and not 0.0 <= o <= 1.0:
        raise RecordRejected("out-of-range-occupancy")
    if s is not None and not 0.0 <= s <= MAX_SPEED_KMH:
        raise RecordRejected("out-of-range-speed")
    if c is not None and not 0 <= c <= MAX_COUNT:
        raise RecordRejected("out-of-range-count")
    if c == 0 and s == 0 and o == 0:
        return CleanLaneRecord(snapped, raw.sensor_id, raw.direction, raw.lane,
                               None, None, None, "dead-lane")
    return CleanLaneRecord(snapped, raw.sensor_id, raw.direction, raw.lane, c, s, o)


def _mean(values):
    if not values:
        return None
    first = values[0]
    # fsum(n * [x]) / n need not round back to x
    if all(v == first for v in values):
        return float(first)
    return math.fsum(values) / len(values)


def aggregate(records: Iterable[CleanLaneRecord], lane_count: int) -> DirectionalSample:
    """Average the lanes of one (sensor, direction, slot).

    Each measurement is averaged over the lanes where it is present; a lane
    is *valid* only when all three are present. With no valid lane the sample
    is ``missing`` and carries no measurements.
    """
    records = list(records)
    if not records:
        raise ValueError("aggregate needs at least one record")
    key = records[0][:3]
    counts, speeds, occs = [], [], []
    valid = 0
    for r in records:
        if r[:3] != key:
            raise ValueError(f"key mismatch: {r[:3]} vs {key}")
        c, s, o = r.vehicle_count, r.avg_speed_kmh, r.occupancy
        if c is not None:
            counts.append(c)
        if s is not None:
            speeds.append(s)
        if o is not None:
            occs.append(o)
        if c is not None and s is not None and o is not None:
            valid += 1
    ts, sensor, direction = key
    if valid == 0:
        return DirectionalSample(sensor, direction, ts, None, None, None, 0, MISSING)
    quality = OK if valid == lane_count else PARTIAL
    return DirectionalSample(sensor, direction, ts, _mean(counts), _mean(speeds), _mean(occs),
                             valid, quality)


def placeholder(sensor_id, direction, ts) -> DirectionalSample:
    return DirectionalSample(sensor_id, direction, ts, None, None, None, 0, MISSING)


def regularize(series: list[DirectionalSample], start=None, end=None) -> tuple[list[DirectionalSample], int]:
    """One entry per 2-minute slot from ``start`` to ``end`` inclusive.

    Defaults to the first and last timestamps present. Absent slots become
    ``missing`` placeholders; for duplicate timestamps the first occurrence is
    kept. Returns ``(regular_series, duplicates_dropped)``.
    """
    if not series:
        return [], 0
    for a, b in zip(series, series[1:]):
        if b.timestamp < a.timestamp:
            raise ValueError(f"series not sorted at {format_timestamp(b.timestamp)}")
    sensor, direction = series[0].sensor_id, series[0].direction
    start = series[0].timestamp if start is None else start
    end = series[-1].timestamp if end is None else end
    out = []
    dups = 0
    expected = start
    for s in series:
        if out and s.timestamp == out[-1].timestamp:
            dups += 1
            continue
        if s.timestamp < start or s.timestamp > end:
            continue
        while expected < s.timestamp:
            out.append(placeholder(sensor, direction, expected))
            expected += SLOT_SECONDS
        out.append(s)
        expected = s.timestamp + SLOT_SECONDS
    while expected <= end:
        out.append(placeholder(sensor, direction, expected))
        expected += SLOT_SECONDS
    return out, dups


# ---------------------------------------------------------------------------
# streaming pipeline

class LaneCounts:
    """Configured lane count per (sensor, direction), with a default."""

    def __init__(self, default=4, overrides=None):
        self.default = default
        self.overrides = dict(overrides or {})

    def __call__(self, sensor_id, direction):
        return self.overrides.get((sensor_id, direction), self.default)


@dataclass
class CleaningSummary:
    lines: int = 0
    accepted: int = 0
    deduplicated: int = 0
    rejected: Counter = field(default_factory=Counter)
    dead_lanes: int = 0
    samples: int = 0
    partial: int = 0
    placeholders: int = 0

    @property
    def rejected_total(self):
        return sum(self.rejected.values())

    def reconciles(self):
        return self.accepted + self.rejected_total + self.deduplicated == self.lines

    def render(self) -> str:
        rows = [
            "# cleaning summary",
            f"input_lines = {self.lines}",
            f"accepted = {self.accepted}",
            f"deduplicated = {self.deduplicated}",
            f"rejected = {self.rejected_total}",
        ]
        rows += [f"rejected.{reason} = {self.rejected.get(reason, 0)}" for reason in REJECT_REASONS]
        rows += [
            f"dead_lanes = {self.dead_lanes}",
            f"samples = {self.samples}",
            f"samples.partial = {self.partial}",
            f"samples.missing = {self.placeholders}",
        ]
        return "\n".join(rows) + "\n"


class _KeyState:
    __slots__ = ("slot", "lanes")

    def __init__(self, slot):
        self.slot = slot
        self.lanes = {}


class DirectionalAverager:
    """Incremental lane averager; feed clean records, receive closed samples.

    ``emit`` is called with each :class:`DirectionalSample` in closing order.
    """

    def __init__(self, lane_counts: LaneCounts, emit: Callable[[DirectionalSample], None],
                 summary: CleaningSummary | None = None, start=None, end=None):
        self.lane_counts = lane_counts
        self.emit = emit
        self.summary = summary if summary is not None else CleaningSummary()
        self.start = start
        self.end = end
        self.state: dict[tuple[str, int], _KeyState] = {}

    def _close(self, key, st):
        if st.lanes:
            sample = aggregate([st.lanes[l] for l in sorted(st.lanes)], self.lane_counts(*key))
        else:
            sample = placeholder(key[0], key[1], st.slot)
        self._out(sample)

    def _out(self, sample):
        s = self.summary
        s.samples += 1
        if sample.quality == MISSING:
            s.placeholders += 1
        elif sample.quality == PARTIAL:
            s.partial += 1
        self.emit(sample)

    def _fill(self, key, first, last):
        for ts in range(first, last + 1, SLOT_SECONDS):
            self._out(placeholder(key[0], key[1], ts))

    def add(self, rec: CleanLaneRecord) -> bool:
        """Returns False (and counts the reason) when the record is not accepted."""
        summary = self.summary
        key = (rec.sensor_id, rec.direction)
        if rec.lane >= self.lane_counts(*key):
            summary.rejected["unknown-lane"] += 1
            return False
        ts = rec.timestamp
        if (self.start is not None and ts < self.start) or (self.end is not None and ts > self.end):
            summary.rejected["outside-range"] += 1
            return False
        st = self.state.get(key)
        if st is None:
            if self.start is not None:
                self._fill(key, self.start, ts - SLOT_SECONDS)
            st = self.state[key] = _KeyState(ts)
        elif ts > st.slot:
            self._close(key, st)
            self._fill(key, st.slot + SLOT_SECONDS, ts - SLOT_SECONDS)
            st.slot = ts
            st.lanes = {}
        elif ts < st.slot:
            summary.rejected["out-of-order"] += 1
            return False
        if rec.lane in st.lanes:
            summary.deduplicated += 1
            return False
        st.lanes[rec.lane] = rec
        summary.accepted += 1
        if rec.note == "dead-lane":
            summary.dead_lanes += 1
        return True

    def finish(self):
        for key in sorted(self.state):
            st = self.state[key]
            self._close(key, st)
            if self.end is not None:
                self._fill(key, st.slot + SLOT_SECONDS, self.end)
        self.state.clear()


def process_lines(lines: Iterable[str], lane_counts: LaneCounts,
                  emit: Callable[[DirectionalSample], None], *,
                  tolerance_s=SNAP_TOLERANCE_S, start=None, end=None,
                  on_error: Callable[[ParseError], None] | None = None) -> CleaningSummary:
    """Run the full ETL over an iterable of reading lines.

    A leading header line is skipped and not counted. Every other line ends
    up as exactly one of accepted, rejected (by reason) or deduplicated.
    """
    summary = CleaningSummary()
    averager = DirectionalAverager(lane_counts, emit, summary, start, end)
    rejected = summary.rejected
    add = averager.add
    lineno = 0
    for lineno, line in enumerate(lines, 1):
        if lineno == 1 and line.startswith("timestamp,"):
            continue
        summary.lines += 1
        try:
            raw = parse_line(line, lineno)
        except ParseError as exc:
            rejected["parse-error"] += 1
            if on_error is not None:
                on_error(exc)
            continue
        try:
            rec = validate(raw, tolerance_s)
        except RecordRejected as exc:
            rejected[exc.reason] += 1
            continue
        add(rec)
    averager.finish()
    return summary


def _num(v):
    return "" if v is None else repr(v)


def format_sample(s: DirectionalSample) -> str:
    return (f"{format_timestamp(s.timestamp)},{s.sensor_id},{s.direction},"
            f"{_num(s.mean_count)},{_num(s.mean_speed_kmh)},{_num(s.mean_occupancy)},"
            f"{s.valid_lanes},{s.quality}")


def parse_sample(line: str) -> DirectionalSample:
    parts = line.rstrip("\r\n").split(",")
    if len(parts) != 8:
        raise ValueError(f"expected 8 fields in sample line, got {len(parts)}")
    ts, sensor, direction, c, s, o, valid, quality = parts
    if quality not in (OK, PARTIAL, MISSING):
        raise ValueError(f"unknown quality {quality!r}")
    return DirectionalSample(
        sensor, int(direction), int(parse_timestamp(ts)),
        float(c) if c else None, float(s) if s else None, float(o) if o else None,
        int(valid), quality,
    )


def read_samples(path) -> Iterator[DirectionalSample]:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().rstrip("\r\n")
        if header != SAMPLES_HEADER:
            raise ValueError(f"{path}: not a directional-sample file")
        for line in fh:
            if line.strip():
                yield parse_sample(line)


def ingest_file(src, dst, lane_counts: LaneCounts, **kwargs) -> CleaningSummary:
    """Stream ``src`` readings into ``dst`` directional samples."""
    with open(src, encoding="ascii", errors="replace") as fin, \
            open(dst, "w", encoding="ascii", newline="\n") as fout:
        fout.write(SAMPLES_HEADER + "\n")
        buf = []
        write = fout.write

        def emit(sample):
            buf.append(format_sample(sample))
            if len(buf) >= 4096:
                write("\n".join(buf) + "\n")
                buf.clear()

        summary = process_lines(fin, lane_counts, emit, **kwargs)
        if buf:
            write("\n".join(buf) + "\n")
    return summary
