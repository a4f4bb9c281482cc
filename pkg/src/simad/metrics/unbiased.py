"""Bias-corrected affiliation precision (UAff) and its fixed-constant variant (NAff).

A uniformly random detector already reaches an affiliation precision close
to 0.5 on most label layouts.  UAff re-centres precision on that
dataset-specific bias; NAff uses a constant instead, so it stays
parameter-free.  Both F1 variants turn negative when precision falls below
the bias.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import UndefinedMetricError
from .affiliation import affiliation
from .classic import ThresholdSpec, select_threshold
from .events import events_from_labels

NAFF_BETA = 0.5


@dataclass(frozen=True)
class BiasSpec:
    mode: str = "empirical"       # empirical | ideal | constant
    constant: float = NAFF_BETA
    repetitions: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("empirical", "ideal", "constant"):
            raise ValueError(f"unknown bias mode {self.mode!r}")
        if not 0.0 <= self.constant < 1.0:
            raise ValueError(f"bias constant must lie in [0, 1), got {self.constant}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    @classmethod
    def parse(cls, text: str, **kw) -> "BiasSpec":
        """``empirical``, ``ideal`` or ``constant:0.5``."""
        mode, _, val = text.partition(":")
        if mode == "constant" and val:
            return cls(mode, float(val), **kw)
        if val:
            raise ValueError(f"bias mode {mode!r} takes no value")
        return cls(mode, **kw)

    def __str__(self):
        if self.mode == "constant":
            return f"constant:{self.constant:g}"
        if self.mode == "empirical":
            return f"empirical(R={self.repetitions},seed={self.seed})"
        return "ideal"


class Unbiased(NamedTuple):
    precision: float
    f1: float


def bias_ideal(anomaly_ratio: float) -> float:
    """Random-detector precision for a single event covering ``anomaly_ratio`` of the series."""
    if not 0.0 <= anomaly_ratio <= 1.0:
        raise ValueError("anomaly_ratio must lie in [0, 1]")
    return 0.5 + 0.5 * anomaly_ratio ** 2


def bias_empirical(labels, spec: BiasSpec = BiasSpec(),
                   threshold: ThresholdSpec = ThresholdSpec("quantile", 0.95)) -> float:
    """Mean affiliation precision of ``spec.repetitions`` uniform-random score series."""
    y = np.asarray(labels).astype(np.int8)
    if not events_from_labels(y):
        raise UndefinedMetricError("bias needs at least one anomaly event")
    streams = np.random.SeedSequence(spec.seed).spawn(spec.repetitions)
    values = []
    for ss in streams:
        scores = np.random.default_rng(ss).random(y.size)
        thr = select_threshold(scores, y, threshold)
        values.append(affiliation(scores >= thr, y).precision)
    return float(np.mean(values))


def resolve_bias(labels, spec: BiasSpec, threshold: ThresholdSpec = ThresholdSpec("quantile", 0.95)) -> float:
    if spec.mode == "constant":
        return spec.constant
    if spec.mode == "ideal":
        return bias_ideal(float(np.mean(labels)))
    return bias_empirical(labels, spec, threshold)


def _signed_f1(p: float, r: float) -> float:
    mag = abs(p)
    if mag + r == 0:
        return 0.0
    f = 2 * mag * r / (mag + r)
    return -f if p < 0 else f


def uaff(ap: float, ar: float, ap_b: float) -> Unbiased:
    """Unbiased affiliation precision and F1 for bias ``ap_b``."""
    if not 0.0 <= ap_b < 1.0:
        raise ValueError(f"bias must lie in [0, 1), got {ap_b}")
    p = (ap - ap_b) / (1.0 - ap_b)
    return Unbiased(p, _signed_f1(p, ar))


def naff(ap: float, ar: float, beta: float = NAFF_BETA) -> Unbiased:
    return uaff(ap, ar, beta)
