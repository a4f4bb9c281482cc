"""Dense tensors with a reverse-mode tape.

Forward computation is eager (plain numpy).  Every differentiable op whose
inputs require gradients appends one entry to the thread's active
:class:`Tape`; :func:`backward` walks that tape once in reverse order and
accumulates gradients into the leaf tensors (parameters).

Broadcasting is deliberately narrow: elementwise ops require equal shapes.
The exceptions are batch dimensions of :func:`matmul`, :func:`add_positional`
and the explicit :func:`expand`.

>>> with Tape():
...     w = Tensor([[1.0, 2.0]], requires_grad=True)
...     loss = sum_all(matmul(w, Tensor([[3.0], [4.0]])))
...     backward(loss)
>>> w.grad
array([[3., 4.]], dtype=float32)
"""

from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError

LAYER_NORM_EPS = 1e-5
COSINE_EPS = 1e-8

_local = threading.local()


# ---------------------------------------------------------------------------
# precision and grad-mode switches
# ---------------------------------------------------------------------------

def get_default_dtype() -> np.dtype:
    return getattr(_local, "dtype", np.dtype(np.float32))


def set_default_dtype(dtype) -> None:
    dtype = np.dtype(dtype)
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {dtype}")
    _local.dtype = dtype


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the default float type (e.g. float64 for grad checks)."""
    old = get_default_dtype()
    set_default_dtype(dtype)
    try:
        yield
    finally:
        _local.dtype = old


def is_grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextlib.contextmanager
def no_grad():
    old = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = old


# ---------------------------------------------------------------------------
# tape
# ---------------------------------------------------------------------------

@dataclass
class TapeEntry:
    kind: str
    inputs: tuple          # node ids, None for constants
    output: int
    backward: Callable     # upstream grad -> tuple of input grads (or None)


@dataclass
class Tape:
    """Ordered record of differentiable operations.

    Node ids are assigned in creation order, so every input id is smaller
    than the id of the entry consuming it.
    """

    entries: list = field(default_factory=list)
    leaves: dict = field(default_factory=dict)   # node id -> leaf Tensor
    _leaf_ids: dict = field(default_factory=dict)  # id(tensor) -> node id
    _next: int = 0

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        _tape_stack().pop()
        return False

    def reset(self) -> None:
        self.entries.clear()
        self.leaves.clear()
        self._leaf_ids.clear()
        self._next = 0

    def _new_id(self) -> int:
        nid = self._next
        self._next += 1
        return nid

    def node_of(self, t: "Tensor"):
        if not t.requires_grad:
            return None
        if t._tape is self and t._node is not None:
            return t._node
        if t._tape is not None and t._tape is not self:
            raise ContractError("tensor belongs to a different tape")
        key = id(t)
        if key not in self._leaf_ids:
            nid = self._new_id()
            self._leaf_ids[key] = nid
            self.leaves[nid] = t
        return self._leaf_ids[key]

    def record(self, kind, inputs, out: "Tensor", backward_fn) -> None:
        in_ids = tuple(self.node_of(t) for t in inputs)
        out._node = self._new_id()
        out._tape = self
        self.entries.append(TapeEntry(kind, in_ids, out._node, backward_fn))


def _tape_stack() -> list:
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = _local.tapes = []
    return stack


def current_tape() -> Tape:
    """The innermost active tape; a per-thread default tape if none is open."""
    stack = _tape_stack()
    if stack:
        return stack[-1]
    default = getattr(_local, "default_tape", None)
    if default is None:
        default = _local.default_tape = Tape()
    return default


# ---------------------------------------------------------------------------
# tensor
# ---------------------------------------------------------------------------

class Tensor:
    """A dense array that may take part in a recorded computation.

    Leaf tensors created with ``requires_grad=True`` are parameters: their
    ``grad`` buffer is filled by :func:`backward`.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_node", "_tape")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data)
        want = np.dtype(dtype) if dtype is not None else get_default_dtype()
        if arr.dtype != want:
            arr = arr.astype(want)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._node = None
        self._tape = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar(self)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f", name={self.name!r}" if self.name else ""
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{rg}{tag})"

    # operator sugar; all defer to the functional ops below
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    def __getitem__(self, idx):
        return slice_(self, idx)


def _not_scalar(t):
    raise ContractError(f"item() needs a one-element tensor, got shape {t.shape}")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(data, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def _result(kind: str, inputs: Sequence[Tensor], out_data, backward_fn) -> Tensor:
    out = Tensor(out_data, dtype=inputs[0].dtype)
    if is_grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        current_tape().record(kind, inputs, out, backward_fn)
    return out


def _check_same(kind: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{kind}: shape mismatch {a.shape} vs {b.shape}")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same("add", a, b)
    return _result("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same("sub", a, b)
    return _result("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same("mul", a, b)
    ad, bd = a.data, b.data
    return _result("mul", (a, b), ad * bd, lambda g: (g * bd, g * ad))


def scale(x: Tensor, c: float) -> Tensor:
    c = x.data.dtype.type(c)
    return _result("scale", (x,), x.data * c, lambda g: (g * c,))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _result("relu", (x,), np.where(mask, x.data, 0).astype(x.dtype), lambda g: (g * mask,))


def rsqrt(x: Tensor, eps: float = 0.0) -> Tensor:
    """Elementwise ``1 / sqrt(x + eps)``."""
    y = 1.0 / np.sqrt(x.data + eps)
    return _result("rsqrt", (x,), y, lambda g: (-0.5 * g * y ** 3,))


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _result("sum_all", (x,), np.asarray(x.data.sum(), dtype=x.dtype),
                   lambda g: (np.broadcast_to(g, shape).copy(),))


def mean_all(x: Tensor) -> Tensor:
    shape, n = x.shape, x.data.size
    return _result("mean_all", (x,), np.asarray(x.data.mean(), dtype=x.dtype),
                   lambda g: (np.full(shape, g / n, dtype=g.dtype),))


def mean_axis(x: Tensor, axis: int, keepdims: bool = True) -> Tensor:
    n = x.shape[axis]
    shape = x.shape

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, shape).copy(),)

    return _result("mean_axis", (x,), x.data.mean(axis=axis, keepdims=keepdims), bw)


def var_axis(x: Tensor, axis: int, keepdims: bool = True) -> Tensor:
    """Population variance along ``axis``."""
    n = x.shape[axis]
    centered = x.data - x.data.mean(axis=axis, keepdims=True)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * (2.0 / n) * centered,)

    return _result("var_axis", (x,), (centered ** 2).mean(axis=axis, keepdims=keepdims), bw)


def expand(x: Tensor, shape: tuple) -> Tensor:
    """Explicit numpy-style broadcast of ``x`` to ``shape``."""
    shape = tuple(shape)
    try:
        out = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise DimensionError(f"expand: cannot broadcast {x.shape} to {shape}") from None
    src = x.shape
    return _result("expand", (x,), out, lambda g: (_unbroadcast(g, src),))


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean of squared differences over every element."""
    _check_same("mse", a, b)
    diff = a.data - b.data
    n = diff.size

    def bw(g):
        ga = g * (2.0 / n) * diff
        return ga, -ga

    return _result("mse", (a, b), np.asarray((diff ** 2).mean(), dtype=a.dtype), bw)


def cosine_similarity_lastdim(a: Tensor, b: Tensor, eps: float = COSINE_EPS) -> Tensor:
    """Cosine similarity of paired vectors along the last axis.

    ``dot / (|a| |b| + eps)``; a zero vector therefore scores 0 rather
    than NaN.
    """
    _check_same("cosine", a, b)
    ad, bd = a.data, b.data
    dot = (ad * bd).sum(-1)
    na = np.sqrt((ad * ad).sum(-1))
    nb = np.sqrt((bd * bd).sum(-1))
    den = na * nb + eps
    cos = dot / den

    def bw(g):
        g = g[..., None]
        den_ = den[..., None]
        coef = (dot / den ** 2)[..., None]
        ua = np.divide(ad, na[..., None], out=np.zeros_like(ad), where=na[..., None] > 0)
        ub = np.divide(bd, nb[..., None], out=np.zeros_like(bd), where=nb[..., None] > 0)
        ga = g * (bd / den_ - coef * nb[..., None] * ua)
        gb = g * (ad / den_ - coef * na[..., None] * ub)
        return ga, gb

    return _result("cosine", (a, b), cos, bw)


# ---------------------------------------------------------------------------
# linear algebra / normalisation
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError(f"matmul: batch dims of {a.shape} and {b.shape} do not broadcast") from None
    ad, bd = a.data, b.data

    def bw(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape)
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape)
        return ga, gb

    return _result("matmul", (a, b), ad @ bd, bw)


def softmax_lastdim(x: Tensor) -> Tensor:
    if x.shape[-1] < 1:
        raise DimensionError("softmax: empty last dimension")
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    if __debug__ and np.isnan(y).any() and not np.isnan(x.data).any():
        raise AssertionError("softmax produced NaN from finite input")

    def bw(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _result("softmax", (x,), y, bw)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalise over the last axis, then apply ``gain`` and ``bias``."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError(f"layer_norm: gain/bias {gain.shape}/{bias.shape} vs last dim {d}")
    mu = x.data.mean(-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc ** 2).mean(-1, keepdims=True) + eps)
    xhat = xc * inv
    gd = gain.data

    def bw(g):
        red = tuple(range(g.ndim - 1))
        dgain = (g * xhat).sum(axis=red)
        dbias = g.sum(axis=red)
        dxhat = g * gd
        dx = inv * (dxhat - dxhat.mean(-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(-1, keepdims=True))
        return dx, dgain, dbias

    return _result("layer_norm", (x, gain, bias), xhat * gd + bias.data, bw)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` shaped (in, out)."""
    y = matmul(x, weight)
    if bias is not None:
        y = add(y, expand(bias, y.shape))
    return y


def embedding_rows(table: Tensor) -> Tensor:
    """Expose a full embedding table as a graph value (no row lookup)."""
    return _result("embedding_rows", (table,), table.data.copy(), lambda g: (g,))


def detach(x: Tensor) -> Tensor:
    """Same values, cut from the graph."""
    return Tensor(x.data, dtype=x.dtype)


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------

def reshape(x: Tensor, shape) -> Tensor:
    src = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot reshape {src} to {tuple(shape)}") from None
    return _result("reshape", (x,), out, lambda g: (g.reshape(src),))


def permute(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _result("permute", (x,), np.transpose(x.data, axes),
                   lambda g: (np.transpose(g, inv),))


def transpose_last2(x: Tensor) -> Tensor:
    if x.ndim < 2:
        raise DimensionError(f"transpose_last2 needs rank >= 2, got {x.shape}")
    return _result("transpose", (x,), np.swapaxes(x.data, -1, -2),
                   lambda g: (np.swapaxes(g, -1, -2),))


def concat_lastdim(xs: Sequence[Tensor]) -> Tensor:
    lead = xs[0].shape[:-1]
    for t in xs:
        if t.shape[:-1] != lead:
            raise DimensionError(f"concat: leading shapes differ {lead} vs {t.shape[:-1]}")
    bounds = np.cumsum([0] + [t.shape[-1] for t in xs])

    def bw(g):
        return tuple(g[..., bounds[i]:bounds[i + 1]] for i in range(len(xs)))

    return _result("concat", tuple(xs), np.concatenate([t.data for t in xs], axis=-1), bw)


def slice_(x: Tensor, idx) -> Tensor:
    """Basic (non-fancy) indexing."""
    src, dt = x.shape, x.dtype

    def bw(g):
        full = np.zeros(src, dtype=dt)
        full[idx] = g
        return (full,)

    return _result("slice", (x,), np.array(x.data[idx]), bw)


def add_positional(x: Tensor, table: Tensor) -> Tensor:
    """Add a table matching the trailing two axes of ``x`` to every batch item."""
    if x.shape[-2:] != table.shape:
        raise DimensionError(f"add_positional: table {table.shape} vs input {x.shape}")
    tshape = table.shape
    return _result("add_positional", (x, table), x.data + table.data,
                   lambda g: (g, _unbroadcast(g, tshape)))


# ---------------------------------------------------------------------------
# backward
# ---------------------------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every reachable leaf.

    Calling twice without zeroing grads adds the contributions.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    if loss._node is None:
        # the loss is itself a leaf parameter
        loss.grad = np.ones_like(loss.data) if loss.grad is None else loss.grad + 1
        return
    tape = loss._tape
    grads = {loss._node: np.ones_like(loss.data)}
    entries = tape.entries
    start = len(entries) - 1
    while start >= 0 and entries[start].output != loss._node:
        start -= 1
    for entry in reversed(entries[: start + 1]):
        g = grads.pop(entry.output, None)
        if g is None:
            continue
        in_grads = entry.backward(g)
        for nid, gi in zip(entry.inputs, in_grads):
            if nid is None or gi is None:
                continue
            if nid in grads:
                grads[nid] = grads[nid] + gi
            else:
                grads[nid] = gi
    for nid, leaf in tape.leaves.items():
        g = grads.get(nid)
        if g is None:
            continue
        g = g.astype(leaf.dtype, copy=False).reshape(leaf.shape)
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g
