import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roadwatch._time import parse_timestamp
from roadwatch import features as F
from roadwatch.features import (Event, FeatureVector, ScalerParams, apply_scaler, capacity, capacity_bound,
                                fit_scaler, label_vectors, local_calendar, make_vector, nearest_rank,
                                rush_hour_score, weekday_flag)
from roadwatch.ingest import DirectionalSample, placeholder, read_samples

T = parse_timestamp("2015-03-02T05:00:00Z")  # 08:00 local on a Monday


def sample(speed=100.0, occ=0.1, count=20.0, ts=T, sensor="S1", d=0):
    return DirectionalSample(sensor, d, ts, count, speed, occ, 4, "ok")


class TestCapacity:
    @pytest.mark.parametrize("count,speed,expected", [(0, 87, 0), (113, 110, 12430), (50, 0, 0)])
    def test_examples(self, count, speed, expected):
        assert capacity(sample(speed, count=count)) == expected

    def test_missing(self):
        with pytest.raises(ValueError):
            capacity(placeholder("S1", 0, T))


class TestBounds:
    def test_nearest_rank_hundred(self):
        assert nearest_rank(range(1, 101)) == 99

    def test_constant(self):
        samples = [sample(100.0, count=30.0, ts=T + 120 * k) for k in range(150)]
        assert capacity_bound(samples) == {("S1", 0): 3000.0}

    def test_too_few_names_key(self):
        samples = [sample(ts=T + 120 * k, sensor="S9") for k in range(99)]
        with pytest.raises(ValueError, match="S9/0"):
            capacity_bound(samples)

    def test_empty_key(self):
        with pytest.raises(ValueError):
            capacity_bound([placeholder("S2", 1, T)])

    def test_empty_values(self):
        with pytest.raises(ValueError):
            nearest_rank([])

    @given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=300),
           st.floats(1, 100))
    def test_matches_sort_oracle(self, values, pct):
        ordered = sorted(values)
        rank = max(1, math.ceil(pct / 100 * len(values)))
        assert nearest_rank(values, pct) == ordered[rank - 1]


class TestCalendar:
    @pytest.mark.parametrize("hhmm,expected", [
        ("03:00", 0.0), ("08:00", 1.0), ("06:00", 0.5), ("00:00", 0.0), ("05:00", 0.0),
        ("07:00", 1.0), ("09:30", 1.0), ("11:30", 0.3), ("14:00", 0.3), ("16:30", 0.65),
        ("17:00", 1.0), ("19:30", 1.0), ("23:00", 0.0), ("23:59", 0.0),
    ])
    def test_rush_knots(self, hhmm, expected):
        h, m = map(int, hhmm.split(":"))
        assert rush_hour_score(60 * h + m) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("bad", [-1, 1440, float("nan")])
    def test_rush_domain(self, bad):
        with pytest.raises(ValueError):
            rush_hour_score(bad)

    @given(st.floats(0, 1439.0))
    def test_rush_continuous_and_bounded(self, m):
        r = rush_hour_score(m)
        assert 0.0 <= r <= 1.0
        # steepest ramp is 1 per 60 minutes
        assert abs(rush_hour_score(min(m + 0.5, 1439.99)) - r) <= 0.5 / 60 + 1e-12

    @pytest.mark.parametrize("d,flag", [(date(2015, 1, 5), 1), (date(2015, 1, 4), 0), (date(2015, 1, 3), 0),
                                        (date(2015, 1, 9), 1)])
    def test_weekday(self, d, flag):
        assert weekday_flag(d) == flag

    @given(st.integers(parse_timestamp("2015-01-01T00:00:00Z") // 120,
                       parse_timestamp("2016-01-01T00:00:00Z") // 120))
    def test_vectorised_calendar_matches_scalar(self, slot):
        ts = slot * 120
        wd, rush = local_calendar(np.array([ts]), 180)
        v = make_vector(sample(ts=ts - 120), sample(ts=ts), 1000.0, 180)
        assert (int(wd[0]), float(rush[0])) == (v.weekday, v.rush)

    def test_local_offset_moves_the_day(self):
        # Sunday 22:00 UTC is Monday 01:00 at UTC+3
        ts = parse_timestamp("2015-01-04T22:00:00Z")
        v = make_vector(sample(ts=ts - 120), sample(ts=ts), 1000.0, 180)
        assert v.weekday == 1
        assert make_vector(sample(ts=ts - 120), sample(ts=ts), 1000.0, 0).weekday == 0


class TestMakeVector:
    def test_identical(self):
        v = make_vector(sample(ts=T - 120), sample(), 1000.0)
        assert (v.d_velocity, v.d_occupancy, v.d_capacity_usage) == (0.0, 0.0, 0.0)
        assert (v.weekday, v.rush, v.t_end) == (1, 1.0, T)

    def test_speed_drop_sign(self):
        assert make_vector(sample(110.0, ts=T - 120), sample(70.0), 1e4).d_velocity == -40.0

    def test_capacity_usage(self):
        a = sample(110.0, count=100.0, ts=T - 120)   # 11,000
        b = sample(40.0, count=30.0)                 # 1,200
        assert make_vector(a, b, 20000.0).d_capacity_usage == pytest.approx(-0.49, abs=1e-15)

    def test_clamped(self):
        v = make_vector(sample(100.0, count=5.0, ts=T - 120), sample(100.0, count=500.0), 1000.0)
        assert v.d_capacity_usage == 1.0

    def test_missing_skipped(self):
        assert make_vector(placeholder("S1", 0, T - 120), sample(), 1000.0) is None
        assert make_vector(sample(ts=T - 120), placeholder("S1", 0, T), 1000.0) is None

    def test_non_consecutive(self):
        with pytest.raises(ValueError):
            make_vector(sample(ts=T - 240), sample(), 1000.0)

    def test_key_mismatch(self):
        with pytest.raises(ValueError):
            make_vector(sample(ts=T - 120, d=1), sample(), 1000.0)

    @given(st.lists(st.floats(0, 200, allow_nan=False), min_size=2, max_size=50),
           st.lists(st.floats(0, 600, allow_nan=False), min_size=50, max_size=50))
    def test_telescoping_and_clamp(self, speeds, counts):
        series = [sample(s, count=counts[i], ts=T + 120 * i) for i, s in enumerate(speeds)]
        vecs = [make_vector(a, b, 5000.0) for a, b in zip(series, series[1:])]
        total = math.fsum(v.d_velocity for v in vecs)
        assert total == pytest.approx(speeds[-1] - speeds[0], abs=1e-9)
        assert all(-1.0 <= v.d_capacity_usage <= 1.0 for v in vecs)


class TestLabels:
    def vectors(self, start, n):
        return [FeatureVector("S1", 0, start + 120 * k, 0, 0, 0, 1, 0.5) for k in range(n)]

    def test_window_examples(self):
        ev = [Event("E1", parse_timestamp("2015-03-02T08:07:00Z"), "S1", 0, "minor-accident")]
        inside = FeatureVector("S1", 0, parse_timestamp("2015-03-02T08:08:00Z"), 0, 0, 0, 1, 1.0)
        outside = inside._replace(t_end=parse_timestamp("2015-03-02T07:40:00Z"))
        other_dir = inside._replace(direction=1)
        assert [v.label for v in label_vectors([inside, outside, other_dir], ev)] == [1, 0, 0]

    def test_empty_log(self):
        assert {v.label for v in label_vectors(self.vectors(T, 10), [])} == {0}

    @given(st.integers(1, 119), st.sampled_from([4, 6, 8, 10, 12]))
    def test_isolated_event_run_length(self, offset, window):
        # off-grid start: exactly ceil((W + 2) / 2) consecutive positives
        t_e = T + 3600 + offset
        labels = [v.label for v in label_vectors(self.vectors(T, 120), [Event("E", t_e, "S1", 0, "k")], window)]
        first = labels.index(1)
        run = sum(labels)
        assert run == math.ceil((window + 2) / 2)
        assert labels[first:first + run] == [1] * run

    def test_grid_aligned_event_gets_one_extra(self):
        t_e = T + 3600
        labels = [v.label for v in label_vectors(self.vectors(T, 120), [Event("E", t_e, "S1", 0, "k")], 10)]
        assert sum(labels) == 7


class TestScaler:
    def test_pm_one(self):
        X = np.array([[-1.0, 0, 0, 1, 0.2], [1.0, 0, 0, 1, 0.4]])
        p = fit_scaler(X)
        assert p.mean[0] == 0.0 and p.std[0] == 1.0
        Z = p.apply(X)
        assert list(Z[:, 0]) == [-1.0, 1.0]

    def test_constant_clamped(self):
        X = np.array([[3.0, 0.5, 0.1, 0, 0], [3.0, 0.5, 0.1, 1, 1]])
        p = fit_scaler(X)
        assert p.std == (1.0, 1.0, 1.0)
        assert np.all(p.apply(X)[:, :3] == 0.0)

    def test_passthrough(self):
        p = ScalerParams((1.0, 2.0, 3.0), (2.0, 2.0, 2.0))
        out = apply_scaler(p, FeatureVector("S1", 0, T, 5.0, 2.0, 1.0, 1, 0.7))
        assert list(out) == [2.0, 0.0, -1.0, 1.0, 0.7]

    def test_too_few(self):
        with pytest.raises(ValueError):
            fit_scaler(np.zeros((1, 5)))

    @given(st.integers(2, 200), st.integers(0, 2**31))
    def test_standardises_training_set(self, n, seed):
        r = np.random.default_rng(seed)
        X = np.column_stack([r.normal(3, 20, n), r.normal(0, 0.05, n), r.uniform(-1, 1, n),
                             r.integers(0, 2, n), r.uniform(0, 1, n)])
        Z = fit_scaler(X).apply(X)
        assert np.allclose(Z[:, :3].mean(axis=0), 0, atol=1e-9)
        assert np.allclose(Z[:, :3].std(axis=0), 1, atol=1e-9)
        assert np.array_equal(Z[:, 3:], X[:, 3:])


class TestTables:
    def test_batch_matches_pairwise(self, small_world):
        w = small_world
        by_key = {}
        for s in read_samples(w.samples):
            by_key.setdefault(s.key, []).append(s)
        expected = {}
        for key, series in by_key.items():
            for a, b in zip(series, series[1:]):
                if b.timestamp - a.timestamp != 120:
                    continue
                v = make_vector(a, b, w.bounds[key])
                if v is not None:
                    expected[(key, v.t_end)] = v
        got = {((r.sensor_id, r.direction), r.t_end): r for r in w.vectors.rows()}
        assert got.keys() == expected.keys()
        for k, v in expected.items():
            g = got[k]
            assert (g.d_velocity, g.d_occupancy, g.d_capacity_usage, g.weekday, g.rush) == v[3:8]

    def test_label_table_matches_label_vectors(self, small_world):
        w = small_world
        events = F.read_events(w.events)
        rows = list(w.vectors.rows())
        assert [v.label for v in label_vectors(rows, events)] == w.vectors.label.tolist()
        assert int(w.vectors.label.sum()) == 6 * len(events)

    def test_order_and_roundtrip(self, small_world, tmp_path):
        vt = small_world.vectors
        order = list(zip(vt.t_end.tolist(), [vt.keys[k] for k in vt.key.tolist()]))
        assert order == sorted(order)
        path = tmp_path / "v.csv"
        F.write_vectors(path, vt)
        back = F.load_vectors(path)
        assert np.array_equal(back.X, vt.X) and np.array_equal(back.label, vt.label)
        assert np.array_equal(back.t_end, vt.t_end)
        assert [back.keys[k] for k in back.key] == [vt.keys[k] for k in vt.key]

    def test_unlabelled_roundtrip(self, small_world, tmp_path):
        vt = small_world.vectors
        bare = F.VectorTable(vt.keys, vt.key, vt.t_end, vt.X, np.full(len(vt), -1))
        F.write_vectors(tmp_path / "u.csv", bare)
        assert set(F.load_vectors(tmp_path / "u.csv").label.tolist()) == {-1}

    def test_bounds_roundtrip(self, small_world, tmp_path):
        F.write_bounds(tmp_path / "b", small_world.bounds)
        assert F.read_bounds(tmp_path / "b") == small_world.bounds

    def test_event_parsing(self):
        e = F.parse_event("E0001,2015-03-02T08:07:13Z,S3,1,minor-accident,minor accident, lane 2 blocked")
        assert e == Event("E0001", parse_timestamp("2015-03-02T08:07:13Z"), "S3", 1, "minor-accident",
                          "minor accident, lane 2 blocked")
        with pytest.raises(ValueError):
            F.parse_event("E1,2015-03-02T08:07:13Z,S3,2,x")
