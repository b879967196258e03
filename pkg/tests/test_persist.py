import numpy as np
import pytest

from roadwatch.models import (ModelFormatError, NetHyper, SplitSpec, dumps, knn_fit, load, loads,
                              net_fit, save, tree_fit)


@pytest.fixture(scope="module")
def models():
    r = np.random.default_rng(11)
    X = np.column_stack([r.normal(0, 20, 60), r.normal(0, 0.1, 60), r.uniform(-1, 1, 60),
                         r.integers(0, 2, 60), r.uniform(0, 1, 60)])
    y = (X[:, 0] + 10 * X[:, 2] > 0).astype(int)
    return {
        "knn": knn_fit(X, y),
        "tree": tree_fit(X, y),
        "net": net_fit(X[:40], y[:40], X[40:], y[40:], hidden=5, hyper=NetHyper(0.1, 50)),
        "X": r.normal(0, 5, (100, 5)),
    }


@pytest.mark.parametrize("kind", ["knn", "tree", "net"])
def test_roundtrip_bit_exact(models, kind, tmp_path):
    m = models[kind]
    spec = SplitSpec(40, 12, 20, 6, seed=9)
    path = tmp_path / "m.model"
    save(m, path, spec)
    back, split = load(path)
    assert split == spec and back.kind == kind
    assert back.scaler == m.scaler
    out = "predict" if kind == "knn" else "score"
    assert np.array_equal(getattr(back, out)(models["X"]), getattr(m, out)(models["X"]))
    assert dumps(back, split) == path.read_text()


def test_split_line_optional(models):
    _, split = loads(dumps(models["tree"]))
    assert split is None


def test_net_meta_survives(models):
    back, _ = loads(dumps(models["net"]))
    assert back.meta == models["net"].meta


@pytest.mark.parametrize("mutate,msg", [
    (lambda t: t.replace("RWMODEL 1", "RWMODEL 2", 1), "version"),
    (lambda t: t.replace("RWMODEL", "XXMODEL", 1), "not a roadwatch"),
    (lambda t: t.replace(" tree\n", " forest\n", 1), "kind"),
    (lambda t: t[: t.rindex("end")], None),
    (lambda t: t + "leaf 0.5 3\n", "trailing"),
    (lambda t: "\n".join(t.splitlines()[:-3] + ["end"]) + "\n", None),
    (lambda t: t.replace("scaler ", "scaler 1.0 ", 1), "scaler"),
    (lambda t: "", None),
])
def test_corruption_rejected(models, mutate, msg):
    with pytest.raises(ModelFormatError, match=msg):
        loads(mutate(dumps(models["tree"])))


def test_bad_number_rejected(models):
    text = dumps(models["net"])
    lines = text.splitlines()
    i = next(k for k, line in enumerate(lines) if line.startswith("b1 "))
    lines[i] = lines[i].replace(lines[i].split()[1], "zz", 1)
    with pytest.raises(ModelFormatError):
        loads("\n".join(lines) + "\n")


def test_dangling_child_rejected(models):
    text = dumps(models["tree"])
    lines = text.splitlines()
    i = next(k for k, line in enumerate(lines) if line.startswith("node "))
    parts = lines[i].split()
    parts[3] = "9999"
    lines[i] = " ".join(parts)
    with pytest.raises(ModelFormatError, match="structure"):
        loads("\n".join(lines) + "\n")
