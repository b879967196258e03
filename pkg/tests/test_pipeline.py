import itertools

import numpy as np
import pytest

from roadwatch import features as F
from roadwatch.ingest import LaneCounts, ingest_file
from roadwatch.models import DEFAULT_SPLIT, decide, knn_fit
from roadwatch.pipeline import StreamDetector, evaluate_model, holdout_partition, horizon_days, train_model

from conftest import SMALL_NET_SPLIT, SMALL_SPLIT

DAYS = 3


@pytest.fixture(scope="module")
def head(small_world, tmp_path_factory):
    """The first few days of the world's readings, streamed and batch-processed."""
    root = tmp_path_factory.mktemp("head")
    lines_per_day = 720 * 14 * 4
    path = root / "readings.csv"
    with open(small_world.readings) as src, open(path, "w") as dst:
        for line in itertools.islice(src, 1 + DAYS * lines_per_day):
            dst.write(line)
    samples = root / "samples.csv"
    summary = ingest_file(str(path), str(samples), LaneCounts(4))
    vt = F.build_vectors(F.load_samples(str(samples)), small_world.bounds)
    return path, vt, summary


@pytest.mark.parametrize("loss", [0.0, 0.5])
def test_streaming_matches_batch(small_world, head, loss):
    path, vt, summary = head
    model = train_model(small_world.vectors, "tree", SMALL_SPLIT)
    det = StreamDetector(model, small_world.bounds, loss, LaneCounts(4))
    streamed = []
    with open(path) as fh:
        for line in fh:
            streamed.extend(det.feed(line))
    streamed.extend(det.finish())

    hits = decide(model.score(vt.X), loss) == 1
    batch = {(vt.keys[k], int(t)) for k, t in zip(vt.key[hits], vt.t_end[hits])}
    assert {((a.sensor_id, a.direction), a.timestamp) for a in streamed} == batch
    assert det.stats.vectors == len(vt)
    assert det.summary.lines == summary.lines
    assert dict(det.summary.rejected) == dict(summary.rejected)
    # one previous sample per key, nothing left queued
    assert len(det._previous) == 14 and det._pending == []


def test_stream_rejects_knn_with_loss(small_world):
    model = knn_fit(small_world.vectors.X[:10], small_world.vectors.label[:10])
    with pytest.raises(ValueError):
        StreamDetector(model, small_world.bounds, 0.5)


def test_train_and_evaluate(small_world):
    vt = small_world.vectors
    net = train_model(vt, "net", SMALL_NET_SPLIT, hidden=5)
    held = holdout_partition(vt, SMALL_NET_SPLIT)
    assert len(held) == len(vt) - 84
    rows = evaluate_model(net, held, [0.94, 0.0], horizon_days(vt))
    assert [r.loss for r in rows] == [0.0, 0.94]
    assert all(r.matrix.total == len(held) for r in rows)
    assert horizon_days(vt) == pytest.approx(14.0, abs=0.01)


def test_train_errors(small_world):
    with pytest.raises(ValueError):
        train_model(small_world.vectors, "net", SMALL_SPLIT)
    with pytest.raises(ValueError):
        train_model(small_world.vectors, "svm", SMALL_SPLIT)
    with pytest.raises(ValueError):
        evaluate_model(knn_fit(small_world.vectors.X[:10], small_world.vectors.label[:10]),
                       small_world.vectors, [0.5])


def test_default_split_shortfall_fails_cleanly(small_world):
    # 24 incidents give ~144 positives, enough; shrink to force a shortfall
    from roadwatch.models import SplitError
    few = small_world.vectors.subset(np.flatnonzero(small_world.vectors.label == 0))
    with pytest.raises(SplitError):
        train_model(few, "tree", DEFAULT_SPLIT)
