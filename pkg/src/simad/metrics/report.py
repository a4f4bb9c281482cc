"""One-call evaluation producing a flat :class:`MetricReport`."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from .affiliation import affiliation
from .classic import (ThresholdSpec, accuracy, auc_roc, binarize, f1_point_adjusted, prf1,
                      select_threshold)
from .unbiased import BiasSpec, naff, resolve_bias, uaff

METRIC_KEYS = ("Prec", "Rec", "F1", "Acc", "F1PA", "AUC", "Aff-Pre", "Aff-Rec", "Aff-F1",
               "UAff-Pre", "UAff-F1", "NAff-Pre", "NAff-F1")


@dataclass
class MetricReport:
    values: dict
    bias: float
    bias_mode: str
    naff_beta: float
    threshold: float
    threshold_mode: str
    flags: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def to_dict(self) -> dict:
        out = {k: self.values.get(k, float("nan")) for k in METRIC_KEYS}
        out.update({"bias": self.bias, "bias_mode": self.bias_mode, "naff_beta": self.naff_beta,
                    "threshold": self.threshold, "threshold_mode": self.threshold_mode})
        for k, msg in self.flags.items():
            out[f"flag:{k}"] = msg
        return out

    def to_json(self) -> str:
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v
        return json.dumps({k: clean(v) for k, v in self.to_dict().items()}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        d = json.loads(text)
        vals = {k: (float("nan") if d.get(k) is None else d[k]) for k in METRIC_KEYS}
        flags = {k[5:]: v for k, v in d.items() if k.startswith("flag:")}
        return cls(vals, d["bias"], d["bias_mode"], d["naff_beta"], d["threshold"],
                   d["threshold_mode"], flags)


def evaluate(scores, labels, threshold: ThresholdSpec = ThresholdSpec(),
             bias: BiasSpec = BiasSpec()) -> MetricReport:
    """Compute every metric for one score series.

    Metrics that cannot be computed are reported as NaN and explained in
    ``report.flags``; the rest are still filled in.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int8)
    if s.shape != y.shape or s.ndim != 1:
        raise DimensionError(f"scores {s.shape} and labels {y.shape} must be equal-length 1-D arrays")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    flags = {}
    v = dict.fromkeys(METRIC_KEYS, float("nan"))

    thr = select_threshold(s, y, threshold)
    if s.size and s.min() == s.max():
        flags["threshold"] = "constant scores: every point falls on the same side of the threshold"
    pred = binarize(s, thr)
    v["Prec"], v["Rec"], v["F1"] = prf1(pred, y)
    v["Acc"] = accuracy(pred, y)
    v["F1PA"] = f1_point_adjusted(pred, y).f1
    try:
        v["AUC"] = auc_roc(s, y)
    except ValueError as exc:
        flags["AUC"] = str(exc)

    ap_b = float("nan")
    try:
        aff = affiliation(pred, y)
        v["Aff-Pre"], v["Aff-Rec"], v["Aff-F1"] = aff
        if aff.empty_prediction:
            flags["Aff-Pre"] = "no predicted anomalies; precision undefined, reported as 0"
        ap_b = resolve_bias(y, bias, threshold)
        v["UAff-Pre"], v["UAff-F1"] = uaff(aff.precision, aff.recall, ap_b)
        v["NAff-Pre"], v["NAff-F1"] = naff(aff.precision, aff.recall, bias.constant)
    except ValueError as exc:
        flags["affiliation"] = str(exc)
    return MetricReport(v, ap_b, str(bias), bias.constant, thr, str(threshold), flags)
