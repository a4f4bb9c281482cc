"""Joint optimisation of reconstruction, denoising and contrastive terms."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, NamedTuple

import numpy as np

from . import tensor as tc
from .errors import ConfigError, TrainingError
from .model import ModelConfig, SimAD, instance_normalize, loss_contrast, reconstruction_loss
from .tensor import Tensor

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 256
    learning_rate: float = 1e-3
    epochs: int = 20
    samples_per_epoch: int = 500
    warmup_iters: int = 500
    beta_max: float = 1.0
    weight_decay: float = 1e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    contrast_guard: float = 1e4
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.warmup_iters < 1:
            raise ConfigError("warmup_iters must be >= 1")
        if self.beta_max < 0:
            raise ConfigError("beta_max must be >= 0")
        if self.batch_size < 1 or self.samples_per_epoch < 1:
            raise ConfigError("batch_size and samples_per_epoch must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")

    @property
    def iters_per_epoch(self) -> int:
        return math.ceil(self.samples_per_epoch / self.batch_size)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


def beta_schedule(i: int, cfg: TrainConfig) -> float:
    """Contrastive weight at iteration ``i``: ``min((i + 1) / N_warmup, beta_max)``."""
    if i < 0:
        raise ValueError("iteration index must be >= 0")
    return min((i + 1) / cfg.warmup_iters, cfg.beta_max)


def cosine_lr(step: int, total_steps: int, lr_max: float) -> float:
    """Cosine decay from ``lr_max`` at step 0 to 0 at step ``total_steps - 1``."""
    if total_steps <= 1:
        return lr_max
    return 0.5 * lr_max * (1.0 + math.cos(math.pi * step / (total_steps - 1)))


class LossBreakdown(NamedTuple):
    total: float
    rec: float
    denoise: float
    cont: float
    beta: float


def total_loss(windows, model: SimAD, beta: float, rng=None, noise=None, stop_targets=None):
    """Composite objective ``L_rec + L_denoise - beta * L_cont`` for a batch.

    The clean and noisy (``x + alpha * J``) windows both go through the
    shared network; both reconstructions are compared with the
    normalised clean window.  Pass ``noise`` (the draw of ``J``) to make
    the loss a deterministic function of the parameters.  ``stop_targets``
    is forwarded to :func:`loss_contrast` (see :func:`contrast_targets`).
    """
    cfg = model.config
    if noise is None:
        if rng is None:
            raise ValueError("need rng or explicit noise")
        noise = rng.standard_normal(np.shape(windows))
    x, x_noisy = _noisy(windows, model, noise)

    x_norm, x_hat, n_plus = model.forward(x)
    _, x_hat_noisy, n_minus = model.forward(x_noisy)
    l_rec = reconstruction_loss(x_hat, x_norm, cfg.patch_len)
    l_den = reconstruction_loss(x_hat_noisy, x_norm, cfg.patch_len)
    l_cont = loss_contrast(model.project(n_plus), model.project(n_minus), stop_targets)
    loss = tc.add(l_rec, l_den)
    if beta != 0:
        loss = tc.sub(loss, tc.scale(l_cont, beta))
    parts = LossBreakdown(float(loss.data), float(l_rec.data), float(l_den.data),
                          float(l_cont.data), float(beta))
    bad = [name for name in ("rec", "denoise", "cont") if not math.isfinite(getattr(parts, name))]
    if bad or not math.isfinite(parts.total):
        raise TrainingError(f"non-finite loss component(s): {', '.join(bad) or 'total'}",
                            component=bad[0] if bad else "total")
    return loss, parts


def _noisy(windows, model: SimAD, noise):
    x = np.asarray(windows, dtype=tc.get_default_dtype())
    if x.ndim == 2:
        x = x[None]
    return x, x + model.config.noise_alpha * np.asarray(noise, dtype=x.dtype)


def contrast_targets(windows, model: SimAD, noise):
    """Current projections ``(H+, H-)`` as plain arrays, the stop-gradient targets."""
    x, x_noisy = _noisy(windows, model, noise)
    with tc.no_grad():
        return (model.project(model.forward(x)[2]).data,
                model.project(model.forward(x_noisy)[2]).data)


def sample_windows(series, count: int, window_len: int, rng) -> np.ndarray:
    """``count`` windows with start offsets drawn uniformly from ``[0, len - T]``."""
    series = np.asarray(series)
    if series.ndim == 1:
        series = series[:, None]
    n = series.shape[0]
    if n < window_len:
        raise ConfigError(f"series length {n} is shorter than window_len {window_len}")
    starts = rng.integers(0, n - window_len + 1, size=count)
    idx = starts[:, None] + np.arange(window_len)[None, :]
    return series[idx]


class AdamW:
    """Adam with decoupled weight decay."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-2):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            p.data *= (1.0 - lr * self.weight_decay)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def train(series, model_cfg: ModelConfig, train_cfg: TrainConfig, model: SimAD | None = None,
          on_record: Callable[[dict], None] | None = None):
    """Train on an unlabeled series of shape ``(n, C)``.

    Returns ``(model, log_records)``; each record holds iteration, epoch,
    lr, beta and the loss components.  On divergence a
    :class:`TrainingError` carrying the last good model is raised.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 1:
        series = series[:, None]
    if series.shape[1] != model_cfg.channels:
        raise ConfigError(f"series has {series.shape[1]} channels, config expects {model_cfg.channels}")
    if series.shape[0] < model_cfg.window_len:
        raise ConfigError(
            f"series length {series.shape[0]} is shorter than window_len {model_cfg.window_len}")
    if model is None:
        model = SimAD(model_cfg, seed=train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)
    opt = AdamW(model.parameters(), lr=train_cfg.learning_rate,
                betas=(train_cfg.adam_beta1, train_cfg.adam_beta2),
                eps=train_cfg.adam_eps, weight_decay=train_cfg.weight_decay)
    per_epoch = train_cfg.iters_per_epoch
    total_steps = train_cfg.epochs * per_epoch
    records = []
    it = 0
    for epoch in range(train_cfg.epochs):
        remaining = train_cfg.samples_per_epoch
        for _ in range(per_epoch):
            bs = min(train_cfg.batch_size, remaining)
            remaining -= bs
            batch = sample_windows(series, bs, model_cfg.window_len, rng)
            noise = rng.standard_normal(batch.shape)
            beta = beta_schedule(it, train_cfg)
            lr = cosine_lr(it, total_steps, train_cfg.learning_rate)
            with tc.Tape():
                try:
                    loss, parts = total_loss(batch, model, beta, noise=noise)
                except TrainingError as exc:
                    raise TrainingError(f"iteration {it}: {exc}", model=model, log=records,
                                        component=exc.component) from None
                if parts.cont > train_cfg.contrast_guard:
                    raise TrainingError(
                        f"iteration {it}: contrastive loss {parts.cont:.4g} exceeds guard "
                        f"{train_cfg.contrast_guard:g}", model=model, log=records, component="cont")
                opt.zero_grad()
                tc.backward(loss)
            opt.step(lr)
            rec = dict(iteration=it, epoch=epoch, lr=lr, beta=beta, L_rec=parts.rec,
                       L_denoise=parts.denoise, L_cont=parts.cont, L=parts.total)
            records.append(rec)
            if on_record is not None:
                on_record(rec)
            log.debug("iter %d loss %.5f", it, parts.total)
            it += 1
    return model, records
