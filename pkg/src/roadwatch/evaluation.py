"""Confusion matrices, rate metrics, false alarms per day, loss sweeps."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np

from .models.threshold import decide

REPORT_COLUMNS = ("tp", "fn", "fp", "tn", "tpr", "tnr", "ppv", "npv", "accuracy", "alarms_per_day")
UNDEFINED = "n/a"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self):
        return self.tp + self.fn + self.fp + self.tn


@dataclass(frozen=True)
class MetricsReport:
    """Rates as fractions; ``None`` where the denominator is zero."""

    tpr: float | None
    tnr: float | None
    ppv: float | None
    npv: float | None
    accuracy: float | None
    alarms_per_day: float | None = None


def confusion(decisions, labels) -> ConfusionMatrix:
    d = np.asarray(decisions, dtype=np.int64).ravel()
    y = np.asarray(labels, dtype=np.int64).ravel()
    if d.shape != y.shape:
        raise ValueError(f"length mismatch: {d.size} decisions vs {y.size} labels")
    tp = int(np.count_nonzero((d == 1) & (y == 1)))
    fn = int(np.count_nonzero((d == 0) & (y == 1)))
    fp = int(np.count_nonzero((d == 1) & (y == 0)))
    tn = int(np.count_nonzero((d == 0) & (y == 0)))
    return ConfusionMatrix(tp, fn, fp, tn)


def _ratio(num, den):
    return num / den if den else None


def alarm_rate(m: ConfusionMatrix, horizon_days: float) -> float:
    if not horizon_days > 0:
        raise ValueError(f"horizon must be positive, got {horizon_days}")
    return m.fp / horizon_days


def metrics(m: ConfusionMatrix, horizon_days: float | None = None) -> MetricsReport:
    # precision is TP/(TP+FP)
    return MetricsReport(
        tpr=_ratio(m.tp, m.tp + m.fn),
        tnr=_ratio(m.tn, m.tn + m.fp),
        ppv=_ratio(m.tp, m.tp + m.fp),
        npv=_ratio(m.tn, m.tn + m.fn),
        accuracy=_ratio(m.tp + m.tn, m.total),
        alarms_per_day=None if horizon_days is None else alarm_rate(m, horizon_days),
    )


@dataclass(frozen=True)
class SweepRow:
    loss: float
    matrix: ConfusionMatrix
    report: MetricsReport


def sweep(scores, labels, loss_values: Sequence[float], horizon_days: float | None = None) -> list[SweepRow]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError(f"length mismatch: {scores.size} scores vs {labels.size} labels")
    rows = []
    for loss in sorted(float(v) for v in loss_values):
        m = confusion(decide(scores, loss), labels)
        rows.append(SweepRow(loss, m, metrics(m, horizon_days)))
    return rows


def percent(value: float | None) -> str:
    """Percentage with two decimals, half away from zero."""
    if value is None:
        return UNDEFINED
    return str(Decimal(repr(value * 100.0)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def render_report(rows: Sequence[tuple[str, MetricsReport]]) -> str:
    """Fixed-width text table, one row per labelled report."""
    show_alarms = any(r.alarms_per_day is not None for _, r in rows)
    header = ["model", "TPR %", "TNR %", "PPV %", "NPV %", "Accuracy %"]
    if show_alarms:
        header.append("alarms/day")
    body = []
    for label, r in rows:
        cells = [label, percent(r.tpr), percent(r.tnr), percent(r.ppv), percent(r.npv),
                 percent(r.accuracy)]
        if show_alarms:
            cells.append(UNDEFINED if r.alarms_per_day is None else f"{r.alarms_per_day:.3f}")
        body.append(cells)
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    out = []
    for row in [header] + body:
        first = row[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        out.append("  ".join([first] + rest).rstrip())
    return "\n".join(out) + "\n"


def _raw(v):
    return "" if v is None else repr(v)


def report_csv(rows: Sequence[tuple[str, float, ConfusionMatrix, MetricsReport]]) -> str:
    """Machine-readable rows: model, loss and every column in ``REPORT_COLUMNS``."""
    lines = ["model,loss," + ",".join(REPORT_COLUMNS)]
    for model, loss, m, r in rows:
        lines.append(",".join([model, repr(float(loss)), str(m.tp), str(m.fn), str(m.fp), str(m.tn),
                               _raw(r.tpr), _raw(r.tnr), _raw(r.ppv), _raw(r.npv), _raw(r.accuracy),
                               _raw(r.alarms_per_day)]))
    return "\n".join(lines) + "\n"
