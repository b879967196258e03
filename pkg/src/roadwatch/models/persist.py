"""Plain-text model files.

Layout::

    RWMODEL 1 <knn|tree|net>
    scaler <mean x3> <std x3>
    split <train_total> <train_pos> <cv_total> <cv_pos> <seed>   (optional)
    ... kind-specific sections, each announcing its row count ...
    end

Floats are written with ``repr`` so they read back bit-for-bit. A file
without the closing ``end`` line, or whose sections are short, is rejected.
"""

from __future__ import annotations

import numpy as np

from ..features import N_FEATURES, ScalerParams
from .knn import NearestNeighborModel
from .net import NeuralNetModel
from .split import SplitSpec
from .tree import RegressionTreeModel, TreeParams

MAGIC = "RWMODEL"
VERSION = 1
KINDS = ("knn", "tree", "net")


class ModelFormatError(ValueError):
    pass


def _floats(values):
    return " ".join(repr(float(v)) for v in values)


def dumps(model, split: SplitSpec | None = None) -> str:
    lines = [f"{MAGIC} {VERSION} {model.kind}",
             f"scaler {_floats(model.scaler.mean)} {_floats(model.scaler.std)}"]
    if split is not None:
        lines.append(f"split {split.train_total} {split.train_pos} {split.cv_total} "
                     f"{split.cv_pos} {split.seed}")
    if isinstance(model, NearestNeighborModel):
        lines.append(f"references {model.references.shape[0]}")
        for label, row in zip(model.labels, model.references):
            lines.append(f"ref {int(label)} {_floats(row)}")
    elif isinstance(model, RegressionTreeModel):
        p = model.params
        lines.append(f"params {p.max_depth} {p.min_leaf} {float(p.min_gain)!r}")
        lines.append(f"nodes {model.n_nodes}")
        for i in range(model.n_nodes):
            if model.feature[i] < 0:
                lines.append(f"leaf {float(model.value[i])!r} {int(model.n_samples[i])}")
            else:
                lines.append(f"node {int(model.feature[i])} {float(model.threshold[i])!r} "
                             f"{int(model.left[i])} {int(model.right[i])} "
                             f"{float(model.value[i])!r} {int(model.n_samples[i])}")
    elif isinstance(model, NeuralNetModel):
        meta = model.meta
        lines.append(f"layers {N_FEATURES} {model.hidden} 1")
        for k in sorted(meta):
            v = meta[k]
            lines.append(f"meta {k} {v!r}")
        for row in model.w1:
            lines.append(f"w1 {_floats(row)}")
        lines.append(f"b1 {_floats(model.b1)}")
        lines.append(f"w2 {_floats(model.w2[0])}")
        lines.append(f"b2 {_floats(model.b2)}")
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def save(model, path, split: SplitSpec | None = None):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps(model, split))


class _Reader:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, tag=None):
        if self.pos >= len(self.lines):
            raise ModelFormatError("truncated model file")
        parts = self.lines[self.pos].split()
        self.pos += 1
        if not parts:
            raise ModelFormatError(f"blank line at {self.pos}")
        if tag is not None and parts[0] != tag:
            raise ModelFormatError(f"line {self.pos}: expected {tag!r}, got {parts[0]!r}")
        return parts

    def peek(self):
        if self.pos >= len(self.lines):
            return None
        parts = self.lines[self.pos].split()
        return parts[0] if parts else None


def _float_list(parts, n, what):
    if len(parts) != n:
        raise ModelFormatError(f"{what}: expected {n} numbers, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ModelFormatError(f"{what}: {exc}") from None


def loads(text: str):
    """Parse a model file. Returns ``(model, split_spec_or_None)``."""
    r = _Reader(text)
    head = r.next()
    if len(head) != 3 or head[0] != MAGIC:
        raise ModelFormatError("not a roadwatch model file")
    if head[1] != str(VERSION):
        raise ModelFormatError(f"unsupported model version {head[1]!r}")
    kind = head[2]
    if kind not in KINDS:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    try:
        return _load_body(r, kind)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model file: {exc}") from None


def _load_body(r: _Reader, kind):
    sc = _float_list(r.next("scaler")[1:], 6, "scaler")
    scaler = ScalerParams(tuple(sc[:3]), tuple(sc[3:]))
    split = None
    if r.peek() == "split":
        s = [int(v) for v in r.next("split")[1:]]
        if len(s) != 5:
            raise ModelFormatError("split line needs 5 integers")
        split = SplitSpec(*s)

    if kind == "knn":
        n = int(r.next("references")[1])
        labels, refs = [], []
        for _ in range(n):
            parts = r.next("ref")
            labels.append(int(parts[1]))
            refs.append(_float_list(parts[2:], N_FEATURES, "ref"))
        model = NearestNeighborModel(np.array(refs, dtype=np.float64).reshape(n, N_FEATURES),
                                     np.array(labels, dtype=np.int64), scaler)
    elif kind == "tree":
        p = r.next("params")
        params = TreeParams(int(p[1]), int(p[2]), float(p[3]))
        n = int(r.next("nodes")[1])
        cols = [[], [], [], [], [], []]
        for _ in range(n):
            parts = r.next()
            if parts[0] == "leaf":
                row = (-1, 0.0, -1, -1, float(parts[1]), int(parts[2]))
            elif parts[0] == "node":
                row = (int(parts[1]), float(parts[2]), int(parts[3]), int(parts[4]),
                       float(parts[5]), int(parts[6]))
            else:
                raise ModelFormatError(f"unexpected tree row {parts[0]!r}")
            for c, v in zip(cols, row):
                c.append(v)
        feature = np.array(cols[0], dtype=np.int64)
        left = np.array(cols[2], dtype=np.int64)
        right = np.array(cols[3], dtype=np.int64)
        internal = feature >= 0
        if n == 0 or np.any(feature >= N_FEATURES) or np.any(left[internal] >= n) \
                or np.any(right[internal] >= n) or np.any(left[internal] <= 0):
            raise ModelFormatError("inconsistent tree structure")
        model = RegressionTreeModel(feature, np.array(cols[1]), left, right,
                                    np.array(cols[4]), np.array(cols[5], dtype=np.int64),
                                    params, scaler)
    else:
        layers = [int(v) for v in r.next("layers")[1:]]
        if len(layers) != 3 or layers[0] != N_FEATURES or layers[2] != 1 or layers[1] < 1:
            raise ModelFormatError(f"unsupported layer sizes {layers}")
        h = layers[1]
        meta = {}
        while r.peek() == "meta":
            parts = r.next("meta")
            meta[parts[1]] = _meta_value(parts[2])
        w1 = [_float_list(r.next("w1")[1:], N_FEATURES, "w1") for _ in range(h)]
        b1 = _float_list(r.next("b1")[1:], h, "b1")
        w2 = _float_list(r.next("w2")[1:], h, "w2")
        b2 = _float_list(r.next("b2")[1:], 1, "b2")
        model = NeuralNetModel(np.array(w1), np.array(b1), np.array([w2]), np.array(b2), scaler, meta)
    r.next("end")
    if r.pos != len(r.lines):
        raise ModelFormatError("trailing data after end marker")
    return model, split


def _meta_value(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text.strip("'\"")


def load(path):
    with open(path, encoding="ascii", errors="strict") as fh:
        return loads(fh.read())
