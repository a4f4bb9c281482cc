from .affiliation import AffiliationScore, affiliation
from .classic import (PRF1, ThresholdSpec, accuracy, auc_roc, best_f1_threshold, binarize,
                      f1_point_adjusted, point_adjust, prf1, select_threshold,
                      threshold_candidates)
from .events import EventSet, events_from_labels
from .report import METRIC_KEYS, MetricReport, evaluate
from .unbiased import NAFF_BETA, BiasSpec, bias_empirical, bias_ideal, naff, resolve_bias, uaff

__all__ = [
    "AffiliationScore", "affiliation", "PRF1", "ThresholdSpec", "accuracy", "auc_roc",
    "best_f1_threshold", "binarize", "f1_point_adjusted", "point_adjust", "prf1",
    "select_threshold", "threshold_candidates", "EventSet", "events_from_labels",
    "METRIC_KEYS", "MetricReport", "evaluate", "NAFF_BETA", "BiasSpec", "bias_empirical",
    "bias_ideal", "naff", "resolve_bias", "uaff",
]
