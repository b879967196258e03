"""Loss-biased decision rule.

A loss in ``[0, 1)`` moves the alarm cut-off from 0.5 towards 1:
``tau = (1 + loss) / 2``. Loss 0 is the unbiased cut; larger losses trade
recall for fewer false alarms.
"""

import numpy as np


def threshold(loss: float) -> float:
    if not 0.0 <= loss < 1.0:
        raise ValueError(f"loss must lie in [0, 1), got {loss}")
    return (1.0 + loss) / 2.0


def decide(score, loss: float):
    """1 (accident) where ``score >= tau``. Accepts a scalar or an array."""
    tau = threshold(loss)
    s = np.asarray(score, dtype=np.float64)
    if np.any((s < 0) | (s > 1)) or np.any(np.isnan(s)):
        raise ValueError("scores must lie in [0, 1]")
    out = (s >= tau).astype(np.int64)
    return int(out) if out.ndim == 0 else out
