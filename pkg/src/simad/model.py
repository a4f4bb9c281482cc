"""The SimAD network: patch feature extractor, EmbedPatch encoder,
reconstruction and projection heads, loss terms and anomaly scores.

Shapes use ``B`` windows of ``T`` timestamps and ``C`` channels, split into
``M = T / P`` patches and embedded to width ``D``.  Every public function
accepts an unbatched ``(T, C)`` window as well as a ``(B, T, C)`` batch.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import tensor as tc
from .errors import ConfigError, DimensionError
from .tensor import Tensor

IN_EPS = 1e-5


@dataclass
class ModelConfig:
    window_len: int = 2048
    channels: int = 1
    patch_len: int = 32
    hidden_dim: int = 512
    heads: int = 8
    layers: int = 8
    embed_count: int = 1000
    proj_dim: int = 128
    noise_alpha: float = 0.1
    ffn_mult: int = 4
    score_mode: str = "replicate"   # or "interpolate"

    def __post_init__(self):
        self.validate()

    @property
    def n_patches(self) -> int:
        return self.window_len // self.patch_len

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.heads

    @property
    def patch_width(self) -> int:
        return self.patch_len * self.channels

    def validate(self) -> None:
        for f in ("window_len", "channels", "patch_len", "hidden_dim", "heads",
                  "layers", "embed_count", "proj_dim", "ffn_mult"):
            if int(getattr(self, f)) < 1:
                raise ConfigError(f"{f} must be >= 1, got {getattr(self, f)}")
        if self.window_len % self.patch_len:
            raise ConfigError(
                f"window_len {self.window_len} is not divisible by patch_len {self.patch_len}")
        if self.heads > self.hidden_dim:
            raise ConfigError(f"heads {self.heads} exceed hidden_dim {self.hidden_dim}")
        if self.embed_count < self.n_patches:
            raise ConfigError(
                f"embed_count {self.embed_count} must be >= patch count {self.n_patches}")
        if self.noise_alpha < 0:
            raise ConfigError("noise_alpha must be >= 0")
        if self.score_mode not in ("replicate", "interpolate"):
            raise ConfigError(f"unknown score_mode {self.score_mode!r}")

    @classmethod
    def tiny(cls, **overrides) -> "ModelConfig":
        """The small configuration used by gradient checks."""
        base = dict(window_len=16, channels=2, patch_len=4, hidden_dim=8, heads=2,
                    layers=2, embed_count=8, proj_dim=4)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# feature extractor pieces
# ---------------------------------------------------------------------------

def _as_batch(x) -> Tensor:
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x))
    if t.ndim == 2:
        t = tc.reshape(t, (1,) + t.shape)
    if t.ndim != 3:
        raise DimensionError(f"expected (T, C) or (B, T, C) input, got {t.shape}")
    return t


def instance_normalize(x, eps: float = IN_EPS):
    """Per-window, per-channel standardisation over time.

    Returns the normalised tensor (batched) and the mean and std arrays,
    each shaped ``(B, 1, C)``.
    """
    x = _as_batch(x)
    mu = tc.mean_axis(x, -2)
    var = tc.var_axis(x, -2)
    centered = tc.sub(x, tc.expand(mu, x.shape))
    out = tc.mul(centered, tc.expand(tc.rsqrt(var, eps), x.shape))
    return out, mu.data, np.sqrt(var.data + eps)


def patching(x: Tensor, patch_len: int) -> Tensor:
    """``(..., T, C) -> (..., M, P*C)``; each patch row is time-major with
    the channels of one timestamp contiguous."""
    *lead, T, C = x.shape
    if T % patch_len:
        raise ConfigError(f"window length {T} is not divisible by patch_len {patch_len}")
    return tc.reshape(x, (*lead, T // patch_len, patch_len * C))


def unpatching(x: Tensor, channels: int) -> Tensor:
    *lead, M, W = x.shape
    return tc.reshape(x, (*lead, M * (W // channels), channels))


def positional_table(window_len: int, channels: int, patch_len: int) -> np.ndarray:
    """Sinusoidal encoding of timestamp positions, already patched to ``(M, P*C)``.

    Position is the timestamp index; the channel slot only selects the
    sin/cos frequency, as in the usual transformer encoding.
    """
    t = np.arange(window_len, dtype=np.float64)[:, None]
    i = np.arange(channels)[None, :]
    freq = np.power(10000.0, -2.0 * (i // 2) / channels)
    angle = t * freq
    table = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return table.reshape(window_len // patch_len, patch_len * channels)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

def _glorot(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(cfg: ModelConfig, seed=0) -> dict:
    """Fresh parameter dict, Glorot-uniform weights, zero biases, unit LN gains."""
    rng = np.random.default_rng(seed)
    D, W, U, d, M, V = (cfg.hidden_dim, cfg.patch_width, cfg.heads, cfg.head_dim,
                        cfg.n_patches, cfg.embed_count)
    H = cfg.ffn_mult * D
    p = {}

    def lin(name, n_in, n_out, bias=True):
        p[f"{name}.weight"] = _glorot(rng, (n_in, n_out), n_in, n_out)
        if bias:
            p[f"{name}.bias"] = np.zeros(n_out)

    def ln(name, n):
        p[f"{name}.gain"] = np.ones(n)
        p[f"{name}.bias"] = np.zeros(n)

    ln("extractor.ln_in", W)
    lin("extractor.value", W, D)
    ln("extractor.ln_out", D)
    for i in range(cfg.layers):
        pre = f"layers.{i}"
        lin(f"{pre}.query", D, U * d)
        lin(f"{pre}.key", D, U * d)
        p[f"{pre}.embedpatch"] = _glorot(rng, (U, V, d), V, d)
        p[f"{pre}.select"] = _glorot(rng, (U, M, V), V, M)
        lin(f"{pre}.merge", U * d, D)
        ln(f"{pre}.ln_attn", D)
        lin(f"{pre}.ffn1", D, H)
        lin(f"{pre}.ffn2", H, D)
        ln(f"{pre}.ln_ffn", D)
    lin("reconstruct", D, W)
    lin("project1", D, D)
    lin("project2", D, cfg.proj_dim)
    dt = tc.get_default_dtype()
    return {k: Tensor(v.astype(dt), requires_grad=True, name=k) for k, v in p.items()}


# ---------------------------------------------------------------------------
# network blocks
# ---------------------------------------------------------------------------

def value_matrix(layer: dict, prefix: str) -> Tensor:
    """``W_V,k @ E_k`` for every head: ``(U, M, d)``, independent of the input."""
    return tc.matmul(layer[f"{prefix}.select"], tc.embedding_rows(layer[f"{prefix}.embedpatch"]))


def embedpatch_attention(n_in: Tensor, params: dict, prefix: str, cfg: ModelConfig,
                         return_parts: bool = False):
    """Multi-head attention whose values come from the learned EmbedPatch tables.

    ``n_in`` is ``(B, M, D)``.  With ``return_parts`` also returns the
    attention weights ``(B, U, M, M)``, the value matrix ``(U, M, d)`` and
    the per-head outputs ``(B, U, M, d)``.
    """
    B, M, _ = n_in.shape
    U, d = cfg.heads, cfg.head_dim

    def heads(name):
        y = tc.linear(n_in, params[f"{prefix}.{name}.weight"], params[f"{prefix}.{name}.bias"])
        return tc.permute(tc.reshape(y, (B, M, U, d)), (0, 2, 1, 3))

    q, k = heads("query"), heads("key")
    scores = tc.scale(tc.matmul(q, tc.transpose_last2(k)), 1.0 / math.sqrt(d))
    attn = tc.softmax_lastdim(scores)
    values = value_matrix(params, prefix)
    z_heads = tc.matmul(attn, values)
    z = tc.reshape(tc.permute(z_heads, (0, 2, 1, 3)), (B, M, U * d))
    z = tc.linear(z, params[f"{prefix}.merge.weight"], params[f"{prefix}.merge.bias"])
    if return_parts:
        return z, attn, values, z_heads
    return z


def encoder_layer(n_in: Tensor, params: dict, index: int, cfg: ModelConfig) -> Tensor:
    pre = f"layers.{index}"
    z = embedpatch_attention(n_in, params, pre, cfg)
    h = tc.layer_norm(tc.add(n_in, z), params[f"{pre}.ln_attn.gain"], params[f"{pre}.ln_attn.bias"])
    f = tc.relu(tc.linear(h, params[f"{pre}.ffn1.weight"], params[f"{pre}.ffn1.bias"]))
    f = tc.linear(f, params[f"{pre}.ffn2.weight"], params[f"{pre}.ffn2.bias"])
    return tc.layer_norm(tc.add(h, f), params[f"{pre}.ln_ffn.gain"], params[f"{pre}.ln_ffn.bias"])


def project(n: Tensor, params: dict) -> Tensor:
    """Per-patch projection head ``Linear(ReLU(Linear(n)))``."""
    h = tc.relu(tc.linear(n, params["project1.weight"], params["project1.bias"]))
    return tc.linear(h, params["project2.weight"], params["project2.bias"])


# ---------------------------------------------------------------------------
# losses and scores
# ---------------------------------------------------------------------------

def _one_minus(x: Tensor) -> Tensor:
    return tc.sub(Tensor(np.ones((), dtype=x.dtype), dtype=x.dtype), x)


def reconstruction_loss(x_hat: Tensor, x: Tensor, patch_len: int) -> Tensor:
    """MSE over all elements plus the mean over patches of ``1 - cos``."""
    x_hat, x = _as_batch(x_hat), _as_batch(x)
    if x_hat.shape != x.shape:
        raise DimensionError(f"reconstruction {x_hat.shape} vs target {x.shape}")
    cos = tc.cosine_similarity_lastdim(patching(x_hat, patch_len), patching(x, patch_len))
    return tc.add(tc.mse(x_hat, x), _one_minus(tc.mean_all(cos)))


# identical formula; the caller pairs the noisy-branch reconstruction with the clean window
loss_rec = reconstruction_loss
loss_denoise = reconstruction_loss


def loss_contrast(h_plus: Tensor, h_minus: Tensor, targets=None) -> Tensor:
    """Symmetric-in-value, asymmetric-in-gradient feature agreement term.

    Each branch is pulled towards a detached copy of the other.  ``targets``
    optionally supplies those stop-gradient copies as fixed arrays
    ``(h_plus_target, h_minus_target)``; at the current parameters this
    leaves value and gradient unchanged, and it makes the loss a plain
    function of the parameters for finite-difference checks.
    """
    if h_plus.shape != h_minus.shape:
        raise DimensionError(f"projection shapes differ: {h_plus.shape} vs {h_minus.shape}")
    if targets is not None:
        h_minus_sg = Tensor(np.asarray(targets[1]), dtype=h_plus.dtype)
        h_plus_sg = Tensor(np.asarray(targets[0]), dtype=h_plus.dtype)
    else:
        h_minus_sg, h_plus_sg = h_minus, h_plus

    def term(a, b):
        b = tc.detach(b)
        cos = tc.mean_all(tc.cosine_similarity_lastdim(a, b))
        return tc.add(tc.mse(a, b), _one_minus(cos))

    return tc.add(term(h_plus, h_minus_sg), term(h_minus, h_plus_sg))


def anomaly_score(x_hat, x, patch_len: int, mode: str = "replicate"):
    """Per-timestamp anomaly scores.

    Returns ``(total, mse_part, sim_part)``, each shaped like ``x`` without
    the channel axis.  The patch similarity term is repeated over the
    ``patch_len`` timestamps of its patch (``mode="replicate"``) or
    linearly interpolated between patch centres (``mode="interpolate"``).
    """
    xh = np.asarray(x_hat.data if isinstance(x_hat, Tensor) else x_hat, dtype=np.float64)
    xx = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    if xh.shape != xx.shape:
        raise DimensionError(f"reconstruction {xh.shape} vs target {xx.shape}")
    *lead, T, C = xx.shape
    mse_part = ((xh - xx) ** 2).mean(-1)
    a = xh.reshape(*lead, T // patch_len, patch_len * C)
    b = xx.reshape(*lead, T // patch_len, patch_len * C)
    cos = (a * b).sum(-1) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1) + tc.COSINE_EPS)
    patch_term = 1.0 - cos
    if mode == "replicate":
        sim_part = np.repeat(patch_term, patch_len, axis=-1)
    elif mode == "interpolate":
        centres = np.arange(T // patch_len) * patch_len + (patch_len - 1) / 2.0
        grid = np.arange(T)
        flat = patch_term.reshape(-1, T // patch_len)
        sim_part = np.stack([np.interp(grid, centres, row) for row in flat]).reshape(*lead, T)
    else:
        raise ValueError(f"unknown score mode {mode!r}")
    return mse_part + sim_part, mse_part, sim_part


def noise_augment(x, alpha: float, rng) -> np.ndarray:
    """``x + alpha * J`` with ``J`` i.i.d. standard normal."""
    x = np.asarray(x)
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 0:
        return x.copy()
    return x + alpha * rng.standard_normal(x.shape)


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------

class SimAD:
    """Parameters plus the forward pass.

    >>> m = SimAD(ModelConfig.tiny(), seed=0)
    >>> m.reconstruct_window(np.zeros((16, 2))).shape
    (1, 16, 2)
    """

    def __init__(self, config: ModelConfig, seed=0, params: dict | None = None):
        self.config = config
        self.params = params if params is not None else init_params(config, seed)
        self.positional = positional_table(config.window_len, config.channels, config.patch_len)

    # -- forward pieces -------------------------------------------------
    def extract_features(self, x_norm: Tensor, use_positional: bool = True) -> Tensor:
        p = self.params
        patches = patching(x_norm, self.config.patch_len)
        if use_positional:
            patches = tc.add_positional(patches, Tensor(self.positional, dtype=patches.dtype))
        h = tc.layer_norm(patches, p["extractor.ln_in.gain"], p["extractor.ln_in.bias"])
        h = tc.linear(h, p["extractor.value.weight"], p["extractor.value.bias"])
        return tc.layer_norm(h, p["extractor.ln_out.gain"], p["extractor.ln_out.bias"])

    def encode(self, n: Tensor) -> Tensor:
        for i in range(self.config.layers):
            n = encoder_layer(n, self.params, i, self.config)
        return n

    def reconstruct(self, n_last: Tensor) -> Tensor:
        y = tc.linear(n_last, self.params["reconstruct.weight"], self.params["reconstruct.bias"])
        return unpatching(y, self.config.channels)

    def project(self, n: Tensor) -> Tensor:
        return project(n, self.params)

    def forward(self, x):
        """Raw windows -> (normalised input, reconstruction, last encoder output)."""
        x = _as_batch(x)
        cfg = self.config
        if x.shape[1:] != (cfg.window_len, cfg.channels):
            raise DimensionError(
                f"expected windows of shape ({cfg.window_len}, {cfg.channels}), got {x.shape[1:]}")
        x_norm, _, _ = instance_normalize(x)
        n_last = self.encode(self.extract_features(x_norm))
        return x_norm, self.reconstruct(n_last), n_last

    __call__ = forward

    def reconstruct_window(self, x) -> np.ndarray:
        with tc.no_grad():
            return self.forward(x)[1].data

    def score(self, x):
        """Scores for raw windows; returns ``(total, mse_part, sim_part)`` of shape (B, T)."""
        with tc.no_grad():
            x_norm, x_hat, _ = self.forward(x)
        return anomaly_score(x_hat, x_norm, self.config.patch_len, self.config.score_mode)

    # -- parameter helpers ---------------------------------------------
    def parameters(self) -> list:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def state_dict(self) -> dict:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict) -> None:
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise ConfigError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, v in state.items():
            if v.shape != self.params[k].shape:
                raise DimensionError(f"{k}: expected {self.params[k].shape}, got {v.shape}")
            self.params[k].data = np.array(v, dtype=self.params[k].dtype)

    def copy(self) -> "SimAD":
        clone = SimAD(self.config, params={})
        clone.params = {k: Tensor(v.data.copy(), requires_grad=True, name=k, dtype=v.dtype)
                        for k, v in self.params.items()}
        return clone


def window_starts(n: int, window_len: int) -> list:
    """Non-overlapping window starts plus a final window aligned to the series end."""
    if n < window_len:
        raise ConfigError(f"series length {n} is shorter than window_len {window_len}")
    starts = list(range(0, n - window_len + 1, window_len))
    if starts[-1] + window_len < n:
        starts.append(n - window_len)
    return starts


def score_series(model: SimAD, series, batch_size: int = 256):
    """One anomaly score per timestamp of a full ``(n, C)`` series.

    Where the tail window overlaps the previous one, the earlier scores are
    kept.  Returns ``(total, mse_part, sim_part)``, each of length ``n``.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    cfg = model.config
    if x.shape[1] != cfg.channels:
        raise ConfigError(f"series has {x.shape[1]} channels, model expects {cfg.channels}")
    T = cfg.window_len
    starts = window_starts(x.shape[0], T)
    out = np.full((3, x.shape[0]), np.nan)
    for b in range(0, len(starts), batch_size):
        chunk = starts[b:b + batch_size]
        windows = np.stack([x[s:s + T] for s in chunk]).astype(tc.get_default_dtype())
        parts = model.score(windows)
        for i, s in enumerate(chunk):
            fresh = np.isnan(out[0, s:s + T])
            for k in range(3):
                out[k, s:s + T][fresh] = parts[k][i][fresh]
    return out[0], out[1], out[2]
