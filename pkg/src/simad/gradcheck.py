"""Central finite-difference checks of tape gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import tensor as tc


def numerical_grad(f: Callable[[], float], param: tc.Tensor, eps: float) -> np.ndarray:
    """``d f / d param`` by central differences, perturbing ``param.data`` in place."""
    g = np.zeros(param.shape, dtype=np.float64)
    flat = param.data.reshape(-1)
    out = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = f()
        flat[i] = old - eps
        down = f()
        flat[i] = old
        out[i] = (up - down) / (2 * eps)
    return g


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """``||a - n|| / max(||a||, ||n||, floor)`` over a whole tensor."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(n), floor)
    return float(np.linalg.norm(a - n) / denom)


def check_gradients(loss_fn: Callable[[], tc.Tensor], params: dict, eps: float,
                    fd_dtype=None, floor: float = 1e-3) -> dict:
    """Relative error of the analytic gradient for every tensor in ``params``.

    ``loss_fn`` must rebuild a scalar loss from the current parameter values
    and be deterministic.  With ``fd_dtype`` the finite differences are
    taken in that precision, starting from the very same parameter values;
    a float32 loss is too coarse to resolve small gradients by differencing.
    ``floor`` bounds the denominator of :func:`relative_error` so tensors
    whose true gradient is zero (such as key biases, which softmax ignores)
    are compared absolutely.
    """
    for p in params.values():
        p.grad = None
    with tc.Tape():
        tc.backward(loss_fn())
    analytic = {k: (np.zeros(p.shape) if p.grad is None else p.grad.astype(np.float64))
                for k, p in params.items()}

    def value():
        with tc.no_grad():
            return float(loss_fn().data)

    saved = {k: p.data for k, p in params.items()}
    dtype = fd_dtype or tc.get_default_dtype()
    try:
        for p in params.values():
            p.data = p.data.astype(dtype)
        with tc.precision(dtype):
            return {k: relative_error(analytic[k], numerical_grad(value, p, eps), floor)
                    for k, p in params.items()}
    finally:
        for k, p in params.items():
            p.data = saved[k]
