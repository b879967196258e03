"""``key = value`` run configuration.

Blank lines and lines starting with ``#`` are ignored. Later duplicates win.
Every key has a default (listed in :data:`DEFAULTS`); unknown keys are an
error. Per-(sensor, direction) lane counts use the pattern key
``lanes.<sensor_id>.<direction>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date

from .ingest import LaneCounts
from .models.net import NetHyper
from .models.split import SplitSpec
from .models.tree import TreeParams
from .simgen import SimConfig


class ConfigError(ValueError):
    def __init__(self, message, key=None, lineno=None):
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)
        self.key = key
        self.lineno = lineno


def _pair(text):
    a, b = (float(v) for v in text.split(","))
    return (a, b)


def _floats(text):
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty list")
    return tuple(vals)


_SIM = SimConfig()

# key -> (default, parser)
DEFAULTS = {
    "sim.sensor_count": (_SIM.sensor_count, int),
    "sim.lanes_per_direction": (_SIM.lanes_per_direction, int),
    "sim.start_date": (_SIM.start_date, date.fromisoformat),
    "sim.end_date": (_SIM.end_date, date.fromisoformat),
    "sim.free_flow_speed_kmh": (_SIM.free_flow_speed_kmh, float),
    "sim.speed_cap_kmh": (_SIM.speed_cap_kmh, float),
    "sim.morning_peak_min": (_SIM.morning_peak_min, float),
    "sim.evening_peak_min": (_SIM.evening_peak_min, float),
    "sim.peak_width_min": (_SIM.peak_width_min, float),
    "sim.evening_peak_ratio": (_SIM.evening_peak_ratio, float),
    "sim.night_flow": (_SIM.night_flow, float),
    "sim.day_flow": (_SIM.day_flow, float),
    "sim.peak_flow": (_SIM.peak_flow, float),
    "sim.weekend_attenuation": (_SIM.weekend_attenuation, float),
    "sim.rush_speed_drop_kmh": (_SIM.rush_speed_drop_kmh, float),
    "sim.occupancy_coeff": (_SIM.occupancy_coeff, float),
    "sim.noise_sigma": (_SIM.noise_sigma, float),
    "sim.incident_count": (_SIM.incident_count, int),
    "sim.incident_duration_min": (_SIM.incident_duration_min, _pair),
    "sim.incident_speed_drop": (_SIM.incident_speed_drop, _pair),
    "sim.drop_rate": (_SIM.drop_rate, float),
    "sim.missing_field_rate": (_SIM.missing_field_rate, float),
    "sim.obstruction_rate": (_SIM.obstruction_rate, float),
    "sim.seed": (_SIM.seed, int),
    "ingest.default_lanes": (4, int),
    "ingest.snap_tolerance_s": (60.0, float),
    "features.utc_offset_min": (180, int),
    "features.bound_percentile": (99.0, float),
    "label.window_min": (10.0, float),
    "split.seed": (42, int),
    "split.train_total": (130, int),
    "split.train_pos": (58, int),
    "split.net_train_total": (100, int),
    "split.net_train_pos": (42, int),
    "split.net_cv_total": (30, int),
    "split.net_cv_pos": (16, int),
    "tree.max_depth": (8, int),
    "tree.min_leaf": (2, int),
    "tree.min_gain": (1e-6, float),
    "net.hidden": (10, int),
    "net.lr": (0.1, float),
    "net.epochs": (2000, int),
    "net.seed": (42, int),
    "eval.losses": ((0.0, 0.5, 0.94), _floats),
    "detect.loss": (0.0, float),
}

_LANE_KEY = re.compile(r"^lanes\.([^.\s,]+)\.([01])$")


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {k: v for k, (v, _) in DEFAULTS.items()})
    lanes: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key, text, lineno=None):
        m = _LANE_KEY.match(key)
        if m:
            try:
                n = int(text)
                if n < 1:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"{key}: lane count must be a positive integer, got {text!r}",
                                  key, lineno) from None
            self.lanes[(m.group(1), int(m.group(2)))] = n
            return
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}", key, lineno)
        parse = DEFAULTS[key][1]
        try:
            self.values[key] = parse(text)
        except (ValueError, TypeError):
            raise ConfigError(f"{key}: cannot parse value {text!r}", key, lineno) from None

    # -- typed views ---------------------------------------------------------

    def sim_config(self, **overrides) -> SimConfig:
        kw = {k[4:]: v for k, v in self.values.items() if k.startswith("sim.")}
        kw.update(overrides)
        return SimConfig(**kw)

    def lane_counts(self) -> LaneCounts:
        return LaneCounts(self["ingest.default_lanes"], self.lanes)

    def split_spec(self, kind: str) -> SplitSpec:
        seed = self["split.seed"]
        if kind == "net":
            return SplitSpec(self["split.net_train_total"], self["split.net_train_pos"],
                             self["split.net_cv_total"], self["split.net_cv_pos"], seed)
        return SplitSpec(self["split.train_total"], self["split.train_pos"], 0, 0, seed)

    def tree_params(self) -> TreeParams:
        return TreeParams(self["tree.max_depth"], self["tree.min_leaf"], self["tree.min_gain"])

    def net_hyper(self) -> NetHyper:
        return NetHyper(self["net.lr"], self["net.epochs"])


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw!r}", None, lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        cfg.set(key, value, lineno)
    return cfg


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
