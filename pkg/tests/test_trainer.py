import math

import numpy as np
import pytest
from scipy import stats

from simad import tensor as tc
from simad.errors import ConfigError, TrainingError
from simad.model import ModelConfig, SimAD
from simad.trainer import (AdamW, TrainConfig, beta_schedule, cosine_lr, sample_windows, total_loss,
                           train)
from simad.tensor import Tensor


def sine_series(n=200, C=2, seed=0):
    t = np.arange(n)[:, None]
    rng = np.random.default_rng(seed)
    return np.sin(2 * np.pi * t / np.array([17.0, 29.0])[:C]) + 0.05 * rng.standard_normal((n, C))


SMALL = dict(batch_size=8, samples_per_epoch=16, epochs=3, warmup_iters=4, learning_rate=1e-3)


# -- schedules -------------------------------------------------------------------

def test_beta_schedule_examples():
    cfg = TrainConfig(warmup_iters=100, beta_max=1.0)
    assert beta_schedule(0, cfg) == 0.01
    assert beta_schedule(99, cfg) == 1.0
    assert beta_schedule(5000, cfg) == 1.0
    cfg = TrainConfig(warmup_iters=100, beta_max=0.3)
    assert beta_schedule(29, cfg) == 0.3
    vals = [beta_schedule(i, cfg) for i in range(300)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        beta_schedule(-1, cfg)


def test_cosine_schedule():
    lrs = [cosine_lr(s, 50, 1e-3) for s in range(50)]
    assert lrs[0] == 1e-3
    assert lrs[-1] <= 1e-5
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_config_validation_and_iterations():
    assert TrainConfig().iters_per_epoch == 2          # 500 windows in batches of 256
    with pytest.raises(ConfigError):
        TrainConfig(warmup_iters=0)
    with pytest.raises(ConfigError):
        TrainConfig(beta_max=-0.1)
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"nope": 1})


# -- optimizer -------------------------------------------------------------------

def scalar_adamw(x0, grad_fn, steps, lr, b1=0.9, b2=0.999, eps=1e-8, wd=1e-2):
    x, m, v = x0, 0.0, 0.0
    out = []
    for t in range(1, steps + 1):
        g = grad_fn(x)
        x = x - lr * wd * x
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x = x - lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        out.append(x)
    return out


def test_adamw_matches_scalar_reference():
    grad_fn = lambda x: 2 * (x - 3.0) + math.cos(x)
    ref = scalar_adamw(0.5, grad_fn, 100, lr=0.05)
    with tc.precision(np.float64):
        p = Tensor(np.array(0.5), requires_grad=True)
    opt = AdamW([p], lr=0.05)
    for want in ref:
        p.grad = np.array(grad_fn(float(p.data)))
        opt.step()
        assert abs(float(p.data) - want) <= 1e-10


def test_adamw_matches_torch():
    torch = pytest.importorskip("torch")
    rng = np.random.default_rng(0)
    w0 = rng.standard_normal((3, 4))
    target = rng.standard_normal((3, 4))
    tw = torch.tensor(w0, dtype=torch.float64, requires_grad=True)
    topt = torch.optim.AdamW([tw], lr=1e-2, weight_decay=0.1)
    with tc.precision(np.float64):
        p = Tensor(w0.copy(), requires_grad=True)
    opt = AdamW([p], lr=1e-2, weight_decay=0.1)
    for _ in range(50):
        topt.zero_grad()
        ((tw - torch.tensor(target)) ** 3).sum().backward()
        topt.step()
        p.grad = 3 * (p.data - target) ** 2
        opt.step()
    np.testing.assert_allclose(p.data, tw.detach().numpy(), rtol=0, atol=1e-12)


def test_adamw_skips_parameters_without_gradient():
    p = Tensor(np.ones(3), requires_grad=True)
    opt = AdamW([p], lr=0.1)
    opt.step()
    np.testing.assert_array_equal(p.data, 1.0)


# -- sampling --------------------------------------------------------------------

def test_sample_windows_contracts():
    x = np.arange(40.0).reshape(20, 2)
    rng = np.random.default_rng(0)
    full = sample_windows(x, 5, 20, rng)
    assert full.shape == (5, 20, 2) and (full == x).all()
    w = sample_windows(x, 50, 6, rng)
    assert w.shape == (50, 6, 2)
    assert (np.diff(w[:, :, 0], axis=1) == 2).all()      # contiguous slices
    with pytest.raises(ConfigError):
        sample_windows(x, 1, 21, rng)
    a = sample_windows(x, 7, 6, np.random.default_rng(3))
    b = sample_windows(x, 7, 6, np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)


def test_sample_windows_offsets_uniform():
    n, T = 60, 11
    x = np.arange(n, dtype=float)[:, None]
    starts = sample_windows(x, 10_000, T, np.random.default_rng(7))[:, 0, 0].astype(int)
    counts = np.bincount(starts, minlength=n - T + 1)
    assert counts.size == n - T + 1
    assert stats.chisquare(counts).pvalue > 0.001


# -- loss assembly ---------------------------------------------------------------

@pytest.fixture
def tiny():
    with tc.precision(np.float64):
        yield SimAD(ModelConfig.tiny(), seed=0)


def test_breakdown_recombines(tiny):
    x = np.random.default_rng(0).standard_normal((4, 16, 2))
    noise = np.random.default_rng(1).standard_normal(x.shape)
    loss, parts = total_loss(x, tiny, 0.37, noise=noise)
    assert abs(parts.rec + parts.denoise - 0.37 * parts.cont - parts.total) <= 1e-6
    assert float(loss.data) == parts.total


def test_beta_zero_is_reconstruction_only(tiny):
    x = np.random.default_rng(0).standard_normal((4, 16, 2))
    noise = np.random.default_rng(1).standard_normal(x.shape)
    _, parts = total_loss(x, tiny, 0.0, noise=noise)
    assert parts.total == parts.rec + parts.denoise


def test_one_step_reduces_reconstruction(tiny):
    x = sine_series(64)[None, :16].repeat(4, axis=0)
    noise = np.random.default_rng(1).standard_normal(x.shape)
    opt = AdamW(tiny.parameters(), lr=1e-3)
    with tc.Tape():
        loss, before = total_loss(x, tiny, 0.01, noise=noise)
        tc.backward(loss)
    opt.step()
    _, after = total_loss(x, tiny, 0.01, noise=noise)
    assert after.rec + after.denoise < before.rec + before.denoise


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_loss_names_component(tiny):
    tiny.params["project2.bias"].data[:] = np.inf
    x = np.random.default_rng(0).standard_normal((2, 16, 2))
    with pytest.raises(TrainingError) as err:
        total_loss(x, tiny, 0.5, noise=np.zeros_like(x))
    assert err.value.component == "cont"


# -- training loop ---------------------------------------------------------------

def test_zero_epochs_returns_initialisation():
    cfg = ModelConfig.tiny()
    model, log = train(sine_series(), cfg, TrainConfig(**{**SMALL, "epochs": 0}))
    fresh = SimAD(cfg, seed=0)
    assert log == []
    for k, v in fresh.params.items():
        np.testing.assert_array_equal(model.params[k].data, v.data)


def test_training_log_and_determinism():
    cfg = ModelConfig.tiny()
    tcfg = TrainConfig(**SMALL)
    _, log1 = train(sine_series(), cfg, tcfg)
    _, log2 = train(sine_series(), cfg, tcfg)
    assert log1 == log2
    assert len(log1) == tcfg.epochs * tcfg.iters_per_epoch
    assert set(log1[0]) == {"iteration", "epoch", "lr", "beta", "L_rec", "L_denoise", "L_cont", "L"}
    for rec in log1:
        assert rec["beta"] == min((rec["iteration"] + 1) / tcfg.warmup_iters, tcfg.beta_max)


def test_beta_max_zero_never_touches_projection_head():
    cfg = ModelConfig.tiny()
    model, _ = train(sine_series(), cfg, TrainConfig(**{**SMALL, "beta_max": 0.0}))
    fresh = SimAD(cfg, seed=0)
    for k in ("project1.weight", "project1.bias", "project2.weight", "project2.bias"):
        np.testing.assert_array_equal(model.params[k].data, fresh.params[k].data)
    assert not np.array_equal(model.params["reconstruct.weight"].data, fresh.params["reconstruct.weight"].data)


def test_contrast_guard_aborts_with_last_good_model():
    cfg = ModelConfig.tiny()
    tcfg = TrainConfig(**{**SMALL, "contrast_guard": 1e-12})
    with pytest.raises(TrainingError) as err:
        train(sine_series(), cfg, tcfg)
    assert err.value.component == "cont"
    assert err.value.model is not None and err.value.log == []


def test_train_rejects_bad_series():
    cfg = ModelConfig.tiny()
    with pytest.raises(ConfigError):
        train(np.zeros((10, 2)), cfg, TrainConfig(**SMALL))
    with pytest.raises(ConfigError):
        train(np.zeros((100, 3)), cfg, TrainConfig(**SMALL))
