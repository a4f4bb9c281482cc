"""Point-wise metrics: thresholding, precision/recall/F1, point adjustment, ROC-AUC."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata

from ..errors import DimensionError, UndefinedMetricError
from .events import events_from_labels

MAX_THRESHOLD_CANDIDATES = 256


class PRF1(NamedTuple):
    precision: float
    recall: float
    f1: float


def _labels(y, name="labels") -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {y.shape}")
    if y.size and not np.isin(y, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 values")
    return y.astype(np.int8)


def _paired(a, b):
    if len(a) != len(b):
        raise DimensionError(f"length mismatch: {len(a)} vs {len(b)}")


def binarize(scores, threshold: float) -> np.ndarray:
    """Anomaly where ``score >= threshold``."""
    return (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.int8)


def _f1(tp, fp, fn):
    tp, fp, fn = (np.asarray(v, dtype=np.float64) for v in (tp, fp, fn))
    prec = np.divide(tp, tp + fp, out=np.zeros_like(tp), where=(tp + fp) > 0)
    rec = np.divide(tp, tp + fn, out=np.zeros_like(tp), where=(tp + fn) > 0)
    f1 = np.divide(2 * prec * rec, prec + rec, out=np.zeros_like(tp), where=(prec + rec) > 0)
    return prec, rec, f1


def prf1(pred, gt) -> PRF1:
    """Precision, recall and F1; an empty denominator gives 0."""
    pred, gt = _labels(pred, "pred"), _labels(gt, "gt")
    _paired(pred, gt)
    tp = int(np.sum((pred == 1) & (gt == 1)))
    fp = int(np.sum((pred == 1) & (gt == 0)))
    fn = int(np.sum((pred == 0) & (gt == 1)))
    p, r, f = _f1(tp, fp, fn)
    return PRF1(float(p), float(r), float(f))


def accuracy(pred, gt) -> float:
    pred, gt = _labels(pred, "pred"), _labels(gt, "gt")
    _paired(pred, gt)
    return float(np.mean(pred == gt)) if len(gt) else 0.0


def threshold_candidates(scores, max_candidates: int | None = MAX_THRESHOLD_CANDIDATES) -> np.ndarray:
    """Distinct score values, or evenly spaced quantiles when there are more
    distinct values than ``max_candidates``."""
    s = np.asarray(scores, dtype=np.float64)
    uniq = np.unique(s)
    if max_candidates is None or uniq.size <= max_candidates:
        return uniq
    q = np.linspace(0.0, 1.0, max_candidates)
    return np.unique(np.quantile(s, q, method="inverted_cdf"))


def best_f1_threshold(scores, labels, max_candidates: int | None = MAX_THRESHOLD_CANDIDATES):
    """Threshold maximising F1 over the candidate set; ties go to the lower threshold.

    Returns ``(threshold, f1)``.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = _labels(labels)
    _paired(s, y)
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    cand = threshold_candidates(s, max_candidates)
    order = np.sort(s)
    pos_sorted = np.sort(s[y == 1])
    # counts of scores >= t via searchsorted on ascending arrays
    n_pred = s.size - np.searchsorted(order, cand, side="left")
    tp = pos_sorted.size - np.searchsorted(pos_sorted, cand, side="left")
    fp = n_pred - tp
    fn = pos_sorted.size - tp
    _, _, f1 = _f1(tp, fp, fn)
    best = int(np.argmax(f1))  # first max = lowest threshold
    return float(cand[best]), float(f1[best])


def point_adjust(pred, gt) -> np.ndarray:
    """Mark a whole ground-truth event as detected when any of its points is."""
    pred, gt = _labels(pred, "pred"), _labels(gt, "gt")
    _paired(pred, gt)
    out = pred.copy()
    for s, e in events_from_labels(gt):
        if out[s:e].any():
            out[s:e] = 1
    return out


def f1_point_adjusted(pred, gt) -> PRF1:
    return prf1(point_adjust(pred, gt), gt)


def auc_roc(scores, labels) -> float:
    """ROC-AUC via the Mann-Whitney statistic with average ranks for ties."""
    s = np.asarray(scores, dtype=np.float64)
    y = _labels(labels)
    _paired(s, y)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC needs at least one positive and one negative label")
    ranks = rankdata(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class ThresholdSpec:
    """How scores become predictions: ``best-f1``, ``quantile`` (value = q) or ``fixed``."""

    mode: str = "best-f1"
    value: float | None = None

    def __post_init__(self):
        if self.mode not in ("best-f1", "quantile", "fixed"):
            raise ValueError(f"unknown threshold mode {self.mode!r}")
        if self.mode == "quantile" and not (self.value is not None and 0.0 <= self.value <= 1.0):
            raise ValueError("quantile threshold needs a value in [0, 1]")
        if self.mode == "fixed" and self.value is None:
            raise ValueError("fixed threshold needs a value")

    @classmethod
    def parse(cls, text: str) -> "ThresholdSpec":
        """``best-f1``, ``quantile:0.95`` or ``fixed:0.3``."""
        if text == "best-f1":
            return cls()
        mode, _, val = text.partition(":")
        if not val:
            raise ValueError(f"threshold spec {text!r} needs a value, e.g. quantile:0.95")
        return cls(mode, float(val))

    def __str__(self):
        return self.mode if self.mode == "best-f1" else f"{self.mode}:{self.value:g}"


def select_threshold(scores, labels, spec: ThresholdSpec) -> float:
    if spec.mode == "best-f1":
        return best_f1_threshold(scores, labels)[0]
    if spec.mode == "quantile":
        return float(np.quantile(np.asarray(scores, dtype=np.float64), spec.value))
    return float(spec.value)
