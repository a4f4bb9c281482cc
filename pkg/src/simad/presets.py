"""Named run configurations.

``desk`` is the configuration used for the sine-spike detection check: it
trains in well under a minute on one CPU core.  The contrastive weight and
noise scale are small because the subtracted contrastive term grows without
bound under Adam once the projection head starts to scale up; with
``noise_alpha=0.01`` and ``beta_max=0.05`` it stays below 1 for the whole run.
"""

from __future__ import annotations

import copy

PRESETS = {
    "full": {},
    "tiny": {
        "model": dict(window_len=16, channels=2, patch_len=4, hidden_dim=8, heads=2, layers=2,
                      embed_count=8, proj_dim=4),
        "train": dict(batch_size=16, samples_per_epoch=64, epochs=5, warmup_iters=10),
    },
    "desk": {
        "model": dict(window_len=256, channels=2, patch_len=16, hidden_dim=32, heads=4, layers=2,
                      embed_count=32, proj_dim=8, noise_alpha=0.01),
        "train": dict(batch_size=64, samples_per_epoch=512, epochs=60, learning_rate=1e-3,
                      warmup_iters=500, beta_max=0.05, seed=0),
    },
}

# the sine-spike split used with the desk preset
DESK_DATA = dict(length=3000, channels=2, anomaly_ratio=0.05, clean_fraction=0.5, seed=0)


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])
