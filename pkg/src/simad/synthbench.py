"""Synthetic metric benchmark: labelled series, simulated detectors of graded
accuracy, and a table of mean metric values per (demo, detector).

>>> labels = gen_labels(DEMOS[2], np.random.default_rng(0))
>>> len(events_from_labels(labels))
1
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import GenerationError
from .metrics import BiasSpec, ThresholdSpec, evaluate, events_from_labels

TABLE_COLUMNS = ("F1", "Acc", "Prec", "Rec", "F1PA", "AUC", "Aff-Pre", "Aff-Rec", "Aff-F1", "NAff-F1")
COLUMN_HEADERS = ("F1", "Acc", "Pre", "Rec", "F1PA", "AUC", "Aff-Pre", "Aff-Rec", "Aff-F1", "NAff-F1")
MAX_PLACEMENT_ATTEMPTS = 1000


@dataclass(frozen=True)
class DemoSpec:
    name: str
    anom_seq: int
    min_len: int
    max_len: int
    length: int = 1000
    reps: int = 20
    quantile: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.anom_seq < 1:
            raise ValueError("anom_seq must be >= 1")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        # each segment needs its own length plus a separating normal point
        if self.anom_seq * (self.max_len + 1) > self.length + 1:
            raise ValueError("segments cannot fit in the series")


DEMOS = {
    1: DemoSpec("Demo1", anom_seq=5, min_len=10, max_len=12),
    2: DemoSpec("Demo2", anom_seq=1, min_len=50, max_len=60),
    3: DemoSpec("Demo3", anom_seq=1, min_len=300, max_len=350),
}


@dataclass(frozen=True)
class SimulatedModel:
    kind: str             # "Random" or "M<xx>"
    accuracy: float = 0.5

    @classmethod
    def parse(cls, name: str) -> "SimulatedModel":
        if name == "Random":
            return cls("Random")
        if name.startswith("M") and name[1:].isdigit():
            acc = int(name[1:]) / 100.0
            if not 0.0 <= acc <= 1.0:
                raise ValueError(f"accuracy out of range in {name!r}")
            return cls(name, acc)
        raise ValueError(f"unknown simulated model {name!r}")

    @property
    def name(self) -> str:
        return self.kind


DEFAULT_MODELS = tuple(SimulatedModel.parse(n) for n in
                       ("Random", "M10", "M60", "M70", "M80", "M90", "M95", "M100"))


def gen_labels(spec: DemoSpec, rng) -> np.ndarray:
    """Place ``anom_seq`` separated segments uniformly at random by rejection sampling."""
    n = spec.length
    y = np.zeros(n, dtype=np.int8)
    taken = np.zeros(n + 2, dtype=bool)   # padded so neighbours of the edges are safe
    for _ in range(spec.anom_seq):
        for _attempt in range(MAX_PLACEMENT_ATTEMPTS):
            seg = int(rng.integers(spec.min_len, spec.max_len + 1))
            start = int(rng.integers(0, n - seg + 1))
            # reject overlap and touching (touching segments would merge into one event)
            if not taken[start:start + seg + 2].any():
                taken[start + 1:start + seg + 1] = True
                y[start:start + seg] = 1
                break
        else:
            raise GenerationError(
                f"could not place {spec.anom_seq} segments of length "
                f"{spec.min_len}-{spec.max_len} in {n} points")
    return y


def dataset_shaped_labels(n: int, ratio: float, n_segments: int, rng, jitter: float = 0.3) -> np.ndarray:
    """Labels with ``n_segments`` events covering about ``ratio`` of ``n`` points."""
    mean_len = ratio * n / n_segments
    lo = max(1, int(round(mean_len * (1 - jitter))))
    hi = max(lo, int(round(mean_len * (1 + jitter))))
    spec = DemoSpec("custom", n_segments, lo, hi, length=n)
    return gen_labels(spec, rng)


def simulate_scores(labels, model: SimulatedModel, rng) -> np.ndarray:
    """Scores of a simulated detector.

    ``Random`` draws uniform scores.  ``Mxx`` is right on each point with
    probability xx/100: a correctly flagged anomaly and a wrongly flagged
    normal point both score ``0.9 + 0.1 * U``; everything else scores 0.
    """
    y = np.asarray(labels).astype(bool)
    if model.kind == "Random":
        return rng.random(y.size)
    correct = rng.random(y.size) < model.accuracy
    high = np.where(y, correct, ~correct)
    return np.where(high, 0.9 + 0.1 * rng.random(y.size), 0.0)


@dataclass
class BenchTable:
    rows: list        # dicts: demo, method, then TABLE_COLUMNS in percent
    errors: dict

    def cell(self, demo: str, method: str, column: str) -> float:
        for r in self.rows:
            if r["demo"] == demo and r["method"] == method:
                return r[column]
        raise KeyError((demo, method))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("Demo", "Method") + COLUMN_HEADERS)
        for r in self.rows:
            w.writerow([r["demo"], r["method"]] + [f"{r[c]:.2f}" for c in TABLE_COLUMNS])
        return buf.getvalue()

    def to_text(self) -> str:
        head = ["Demo", "Method", *COLUMN_HEADERS]
        body = [[r["demo"], r["method"], *(f"{r[c]:.2f}" for c in TABLE_COLUMNS)] for r in self.rows]
        widths = [max(len(row[i]) for row in [head, *body]) for i in range(len(head))]
        lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in [head, *body]]
        return "\n".join(lines) + "\n"


def run_bench(demos=tuple(DEMOS.values()), models=DEFAULT_MODELS, reps: int | None = None,
              seed: int = 0) -> BenchTable:
    """Average every metric over ``reps`` label draws for each (demo, model) cell.

    Labels are shared by all models within one repetition; each cell draws
    its scores from its own seed stream.
    """
    rows, errors = [], {}
    for d_idx, demo in enumerate(demos):
        n_reps = demo.reps if reps is None else reps
        sums = {m.name: dict.fromkeys(TABLE_COLUMNS, 0.0) for m in models}
        bad = {m.name: None for m in models}
        for rep in range(n_reps):
            labels = gen_labels(demo, np.random.default_rng([seed, d_idx, rep]))
            for m_idx, model in enumerate(models):
                rng = np.random.default_rng([seed, d_idx, rep, m_idx + 1])
                scores = simulate_scores(labels, model, rng)
                try:
                    rep_ = evaluate(scores, labels, ThresholdSpec("quantile", demo.quantile),
                                    BiasSpec("constant"))
                except Exception as exc:  # noqa: BLE001 - recorded per cell
                    bad[model.name] = f"{type(exc).__name__}: {exc}"
                    continue
                for c in TABLE_COLUMNS:
                    sums[model.name][c] += rep_[c]
        for model in models:
            row = {"demo": demo.name, "method": model.name}
            if bad[model.name]:
                errors[(demo.name, model.name)] = bad[model.name]
                row.update(dict.fromkeys(TABLE_COLUMNS, float("nan")))
            else:
                row.update({c: 100.0 * sums[model.name][c] / n_reps for c in TABLE_COLUMNS})
            rows.append(row)
    return BenchTable(rows, errors)


def demos_from_arg(arg: str, seed: int = 0):
    keys = sorted(DEMOS) if arg == "all" else [int(arg)]
    return [replace(DEMOS[k], seed=seed) for k in keys]


__all__ = ["DemoSpec", "DEMOS", "SimulatedModel", "DEFAULT_MODELS", "gen_labels",
           "dataset_shaped_labels", "simulate_scores", "run_bench", "BenchTable",
           "TABLE_COLUMNS", "events_from_labels"]
