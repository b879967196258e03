"""Stratified undersampling of a heavily imbalanced labelled set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train_total: int
    train_pos: int
    cv_total: int = 0
    cv_pos: int = 0
    seed: int = 42

    def __post_init__(self):
        if min(self.train_total, self.train_pos, self.cv_total, self.cv_pos) < 0:
            raise SplitError("split sizes must be non-negative")
        if self.train_pos > self.train_total:
            raise SplitError(f"train_pos {self.train_pos} exceeds train_total {self.train_total}")
        if self.cv_pos > self.cv_total:
            raise SplitError(f"cv_pos {self.cv_pos} exceeds cv_total {self.cv_total}")


# counts used for the nearest-neighbour and tree models, and for the network
DEFAULT_SPLIT = SplitSpec(130, 58)
DEFAULT_NET_SPLIT = SplitSpec(100, 42, 30, 16)


def split(labels, spec: SplitSpec):
    """Return sorted index arrays ``(train, cv, test)``.

    Positives and negatives are each shuffled with a generator seeded by
    ``spec.seed``; train takes the first slice of each, cv the next, and the
    test set is everything left over.
    """
    labels = np.asarray(labels)
    if np.any((labels != 0) & (labels != 1)):
        raise SplitError("split needs every vector labelled 0 or 1")
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    need_pos = spec.train_pos + spec.cv_pos
    need_neg = (spec.train_total - spec.train_pos) + (spec.cv_total - spec.cv_pos)
    if need_pos > pos.size:
        raise SplitError(f"split needs {need_pos} positives but only {pos.size} available "
                         f"(short by {need_pos - pos.size})")
    if need_neg > neg.size:
        raise SplitError(f"split needs {need_neg} negatives but only {neg.size} available "
                         f"(short by {need_neg - neg.size})")
    rng = np.random.default_rng(spec.seed)
    pos = rng.permutation(pos)
    neg = rng.permutation(neg)
    tn = spec.train_total - spec.train_pos
    cn = spec.cv_total - spec.cv_pos
    train = np.sort(np.concatenate([pos[:spec.train_pos], neg[:tn]]))
    cv = np.sort(np.concatenate([pos[spec.train_pos:need_pos], neg[tn:tn + cn]]))
    taken = np.zeros(labels.size, dtype=bool)
    taken[train] = True
    taken[cv] = True
    test = np.flatnonzero(~taken)
    return train, cv, test
