"""Affiliation precision and recall on integer timestamps.

Each ground-truth event owns an affiliation zone (the points closer to it
than to any other event).  Inside zone ``j`` with ``Z`` points:

* a predicted point ``x`` at distance ``delta`` from event ``j`` earns the
  survival probability ``#{X in zone : dist(X, event) >= delta} / Z``;
* an event point ``y`` whose nearest predicted point in the zone is ``d``
  away earns ``#{X in zone : |X - y| >= d} / Z``.

Zone precision is the mean over the zone's predicted points (zones without
predictions are skipped), zone recall the mean over the event's points
(0 when the zone has no predictions).  Both counts have closed forms, so
nothing is sampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import UndefinedMetricError
from .events import EventSet


@dataclass
class AffiliationScore:
    precision: float
    recall: float
    f1: float
    zone_precision: list = field(default_factory=list)   # NaN where the zone has no predictions
    zone_recall: list = field(default_factory=list)
    empty_prediction: bool = False

    def __iter__(self):
        return iter((self.precision, self.recall, self.f1))


def _dist_to_event(x: np.ndarray, s: int, e: int) -> np.ndarray:
    return np.where(x < s, s - x, np.where(x >= e, x - (e - 1), 0))


def zone_precision(pred_idx: np.ndarray, zone: tuple, event: tuple) -> float:
    """Mean survival probability of the predicted points of one zone."""
    a, b = zone
    s, e = event
    z = b - a
    delta = _dist_to_event(pred_idx, s, e)
    # points at distance >= delta, counted separately on the left and right flanks
    left = np.maximum(0, (s - a) - delta + 1)
    right = np.maximum(0, (b - e) - delta + 1)
    count = np.where(delta == 0, z, left + right)
    return float(count.mean() / z)


def zone_recall(pred_idx: np.ndarray, zone: tuple, event: tuple) -> float:
    """Mean survival probability of the event points given the zone's predictions."""
    a, b = zone
    s, e = event
    z = b - a
    y = np.arange(s, e)
    far = 4 * (b - a + e - s) + 4
    pos = np.searchsorted(pred_idx, y)
    right = np.where(pos < pred_idx.size, pred_idx[np.minimum(pos, pred_idx.size - 1)] - y, far)
    left = np.where(pos > 0, y - pred_idx[np.maximum(pos - 1, 0)], far)
    d = np.minimum(left, right)
    # zone points strictly closer than d to y
    closer = np.where(d == 0, 0, np.minimum(b, y + d) - np.maximum(a, y - d + 1))
    return float(((z - closer) / z).mean())


def _as_eventset(obj, n):
    if isinstance(obj, EventSet):
        return obj
    arr = np.asarray(obj)
    if n is not None and arr.size != n:
        raise ValueError(f"label length {arr.size} does not match n={n}")
    return EventSet.from_labels(arr)


def affiliation(pred, gt, n: int | None = None) -> AffiliationScore:
    """Affiliation precision, recall and F1.

    ``pred`` and ``gt`` are :class:`EventSet` objects or 0/1 label arrays.
    Empty predictions give precision 0 with ``empty_prediction`` set.
    """
    gt = _as_eventset(gt, n)
    pred = _as_eventset(pred, gt.n)
    if pred.n != gt.n:
        raise ValueError(f"length mismatch: {pred.n} vs {gt.n}")
    if len(gt) == 0:
        raise UndefinedMetricError("affiliation needs at least one ground-truth event")
    pred_idx = np.flatnonzero(pred.to_labels()).astype(np.int64)
    zp, zr = [], []
    for zone, event in zip(gt.zones(), gt.events):
        lo, hi = np.searchsorted(pred_idx, zone)
        inside = pred_idx[lo:hi]
        if inside.size == 0:
            zp.append(float("nan"))
            zr.append(0.0)
            continue
        zp.append(zone_precision(inside, zone, event))
        zr.append(zone_recall(inside, zone, event))
    defined = [v for v in zp if not np.isnan(v)]
    precision = float(np.mean(defined)) if defined else 0.0
    recall = float(np.mean(zr))
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return AffiliationScore(precision, recall, f1, zp, zr, empty_prediction=not defined)
