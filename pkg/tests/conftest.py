import os
from dataclasses import dataclass
from datetime import date

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from roadwatch import features as F
from roadwatch.ingest import LaneCounts, ingest_file
from roadwatch.models import SplitSpec
from roadwatch.simgen import SimConfig, write_outputs

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# lines collected by tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        # tests run in file order; list the criteria by number
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("] ")[1].split(".")[0])):
            terminalreporter.write_line(line)


# a fortnight, enough incidents to fill a scaled-down split
SMALL_SIM = SimConfig(start_date=date(2015, 3, 2), end_date=date(2015, 3, 16),
                      incident_count=24, seed=7)
SMALL_SPLIT = SplitSpec(80, 36, 0, 0, seed=3)
SMALL_NET_SPLIT = SplitSpec(60, 26, 24, 10, seed=3)


@dataclass
class World:
    root: str
    readings: str
    events: str
    samples: str
    vectors_path: str
    bounds_path: str
    vectors: F.VectorTable
    bounds: dict
    incidents: list


@pytest.fixture(scope="session")
def small_world(tmp_path_factory):
    root = tmp_path_factory.mktemp("world")
    readings = str(root / "readings.csv")
    events = str(root / "events.csv")
    samples = str(root / "samples.csv")
    _, incidents = write_outputs(SMALL_SIM, readings, events)
    ingest_file(readings, samples, LaneCounts(SMALL_SIM.lanes_per_direction))
    table = F.load_samples(samples)
    bounds = F.table_bounds(table)
    vt = F.label_table(F.build_vectors(table, bounds), F.read_events(events))
    vectors_path = str(root / "vectors.csv")
    bounds_path = str(root / "vectors.bounds")
    F.write_vectors(vectors_path, vt)
    F.write_bounds(bounds_path, bounds)
    return World(str(root), readings, events, samples, vectors_path, bounds_path, vt, bounds, incidents)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
