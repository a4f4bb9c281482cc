"""Desk-scale synthetic datasets with labelled injected anomalies."""

from __future__ import annotations

import numpy as np

SPIKE, SHIFT, NOISE, FLAT = "spike", "shift", "noise", "flat"


def make_sine_spike(length: int = 3000, channels: int = 2, anomaly_ratio: float = 0.05,
                    clean_fraction: float = 0.5, seed: int = 0, noise_std: float = 0.05):
    """Multi-channel sinusoids with injected anomalies.

    Anomalies only appear after the first ``clean_fraction`` of the series,
    so that prefix can serve as an anomaly-free training split.  About
    ``anomaly_ratio * length`` points are anomalous, mixing single-point
    spikes with level-shift, noise-burst and flat-line segments.

    Returns ``(values, labels)`` with shapes ``(length, channels)`` and
    ``(length,)``.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length, dtype=np.float64)
    x = np.empty((length, channels))
    for c in range(channels):
        p1 = rng.uniform(30, 60)
        p2 = rng.uniform(9, 19)
        x[:, c] = (np.sin(2 * np.pi * t / p1 + rng.uniform(0, 2 * np.pi))
                   + 0.4 * np.sin(2 * np.pi * t / p2 + rng.uniform(0, 2 * np.pi)))
    x += noise_std * rng.standard_normal(x.shape)

    labels = np.zeros(length, dtype=np.int8)
    target = int(round(anomaly_ratio * length))
    lo = int(clean_fraction * length)
    kinds = (SPIKE, SHIFT, NOISE, FLAT)
    k = 0
    guard = 0
    while labels.sum() < target and guard < 10_000:
        guard += 1
        kind = kinds[k % len(kinds)]
        seg = 1 if kind == SPIKE else int(rng.integers(8, 21))
        seg = min(seg, target - int(labels.sum()))
        start = int(rng.integers(lo, length - seg + 1))
        # keep injections apart so every label run is one injected anomaly
        if labels[max(0, start - 3):start + seg + 3].any():
            continue
        ch = int(rng.integers(channels))
        sl = slice(start, start + seg)
        if kind == SPIKE:
            x[sl, ch] += rng.choice([-1.0, 1.0]) * rng.uniform(3.0, 5.0)
        elif kind == SHIFT:
            x[sl, ch] += rng.choice([-1.0, 1.0]) * rng.uniform(1.5, 2.5)
        elif kind == NOISE:
            x[sl, ch] += rng.normal(0.0, 1.0, seg)
        else:
            x[sl, ch] = x[max(start - 1, 0), ch] + 0.5
        labels[sl] = 1
        k += 1
    return x, labels
