"""Dense float64 matrices with tape-based reverse-mode differentiation.

A :class:`Matrix` wraps a numpy array whose last two axes are ``(rows, cols)``.
An optional leading batch axis is allowed so that a minibatch of samples runs
through the same graph; weights stay 2-D and their gradients are summed over
the batch.

Operations are recorded on the active :class:`Tape` whenever one of the
operands requires a gradient::

    with Tape() as tape:
        loss = sum_all(matmul(x, w))
    grads = backward(tape, loss)
    grads[w]   # ndarray shaped like w
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "ContractError",
    "Matrix",
    "Tape",
    "Gradients",
    "AdamW",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "add_bias",
    "transpose",
    "softmax_rows",
    "log_softmax_rows",
    "layer_norm",
    "gelu",
    "concat_cols",
    "concat_rows",
    "take_row",
    "take_col",
    "mean_rows",
    "mean_all",
    "sum_all",
    "cross_entropy",
    "backward",
    "adamw_step",
    "flop_counter",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(ValueError):
    """A documented precondition does not hold."""


def _shape_str(a: np.ndarray) -> str:
    return "x".join(str(s) for s in a.shape)


class Matrix:
    """A 2-D (optionally batched) float64 array that may carry a gradient."""

    __slots__ = ("data", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim not in (2, 3):
            raise ShapeError(f"Matrix data must be 2-D or batched 3-D, got {arr.ndim}-D")
        if arr.shape[-1] < 1 or arr.shape[-2] < 1:
            raise ShapeError(f"Matrix dimensions must be positive, got {_shape_str(arr)}")
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def zeros(cls, rows: int, cols: int, **kw) -> "Matrix":
        return cls(np.zeros((rows, cols)), **kw)

    @classmethod
    def eye(cls, n: int, **kw) -> "Matrix":
        return cls(np.eye(n), **kw)

    @property
    def rows(self) -> int:
        return self.data.shape[-2]

    @property
    def cols(self) -> int:
        return self.data.shape[-1]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def batched(self) -> bool:
        return self.data.ndim == 3

    def numpy(self) -> np.ndarray:
        return self.data

    def tolist(self) -> list:
        return self.data.tolist()

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Matrix{tag}({_shape_str(self.data)}, requires_grad={self.requires_grad})"

    # hashing by identity lets a Matrix key the gradient map
    __hash__ = object.__hash__

    def __eq__(self, other):
        return self is other


# ---------------------------------------------------------------------------
# tape
# ---------------------------------------------------------------------------

@dataclass
class _Node:
    out: Matrix
    inputs: tuple[Matrix, ...]
    vjp: Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


_ACTIVE: list["Tape"] = []


class Tape:
    """Append-only record of primitive operations.

    Nodes are appended in execution order, so every node's operands were
    produced before it (or are leaves).
    """

    def __init__(self) -> None:
        self.nodes: list[_Node] = []
        self._tracked: set[int] = set()

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.remove(self)

    def tracks(self, m: Matrix) -> bool:
        return m.requires_grad or id(m) in self._tracked

    def record(self, out: Matrix, inputs: tuple[Matrix, ...], vjp) -> None:
        self.nodes.append(_Node(out, inputs, vjp))
        self._tracked.add(id(out))

    def __len__(self) -> int:
        return len(self.nodes)


class Gradients(dict):
    """Mapping ``Matrix -> ndarray`` for every trainable leaf reached."""

    def get_or_zeros(self, m: Matrix) -> np.ndarray:
        g = self.get(m)
        return np.zeros_like(m.data) if g is None else g


def _record(out: np.ndarray, inputs: tuple[Matrix, ...], vjp) -> Matrix:
    result = Matrix(out)
    if _ACTIVE:
        tape = _ACTIVE[-1]
        if any(tape.tracks(m) for m in inputs):
            tape.record(result, inputs, vjp)
    return result


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def backward(tape: Tape, loss: Matrix) -> Gradients:
    """Reverse pass from a scalar ``loss`` over every node on ``tape``.

    Returns gradients for each leaf with ``requires_grad`` set.
    """
    if loss.data.shape != (1, 1):
        raise ContractError(f"loss must be a 1x1 matrix, got {_shape_str(loss.data)}")
    adj: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    grads = Gradients()
    for node in reversed(tape.nodes):
        g = adj.pop(id(node.out), None)
        if g is None:
            continue
        parts = node.vjp(g)
        for inp, gi in zip(node.inputs, parts):
            if gi is None or not tape.tracks(inp):
                continue
            gi = _unbroadcast(gi, inp.data.shape)
            key = id(inp)
            if key in adj:
                adj[key] = adj[key] + gi
            else:
                adj[key] = gi
            if inp.requires_grad:
                grads[inp] = adj[key]
    return grads


# ---------------------------------------------------------------------------
# flop instrumentation
# ---------------------------------------------------------------------------

class _FlopCounter:
    def __init__(self) -> None:
        self.enabled = False
        self.count = 0

    def __enter__(self) -> "_FlopCounter":
        self.enabled = True
        self.count = 0
        return self

    def __exit__(self, *exc) -> None:
        self.enabled = False


flop_counter = _FlopCounter()
"""Tallies scalar multiply-adds performed by :func:`matmul` inside a ``with`` block."""


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def matmul(a: Matrix, b: Matrix) -> Matrix:
    if a.cols != b.rows:
        raise ShapeError(
            f"matmul shape mismatch: {_shape_str(a.data)} @ {_shape_str(b.data)}"
        )
    out = a.data @ b.data
    if flop_counter.enabled:
        flop_counter.count += int(np.prod(out.shape)) * a.cols

    def vjp(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return ga, gb

    return _record(out, (a, b), vjp)


def _check_same(a: Matrix, b: Matrix, op: str) -> None:
    if a.data.shape[-2:] != b.data.shape[-2:]:
        raise ShapeError(f"{op} shape mismatch: {_shape_str(a.data)} vs {_shape_str(b.data)}")


def add(a: Matrix, b: Matrix) -> Matrix:
    _check_same(a, b, "add")
    return _record(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Matrix, b: Matrix) -> Matrix:
    _check_same(a, b, "sub")
    return _record(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Matrix, b: Matrix) -> Matrix:
    """Elementwise product."""
    _check_same(a, b, "mul")
    return _record(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: Matrix, k: float) -> Matrix:
    return _record(a.data * k, (a,), lambda g: (g * k,))


def add_bias(a: Matrix, bias: Matrix) -> Matrix:
    """Add a ``1 x cols`` row vector to every row of ``a``."""
    if bias.data.shape != (1, a.cols):
        raise ShapeError(
            f"bias must be 1x{a.cols}, got {_shape_str(bias.data)}"
        )
    return _record(a.data + bias.data, (a, bias), lambda g: (g, g))


def transpose(a: Matrix) -> Matrix:
    return _record(np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def softmax_rows(a: Matrix) -> Matrix:
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _record(s, (a,), vjp)


def log_softmax_rows(a: Matrix) -> Matrix:
    z = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    s = np.exp(out)

    def vjp(g):
        return (g - s * g.sum(axis=-1, keepdims=True),)

    return _record(out, (a,), vjp)


def layer_norm(a: Matrix, gain: Matrix, shift: Matrix, eps: float = 1e-5) -> Matrix:
    """Per-row normalisation followed by a learned ``1 x cols`` gain and shift."""
    for p, nm in ((gain, "gain"), (shift, "shift")):
        if p.data.shape != (1, a.cols):
            raise ShapeError(f"layer_norm {nm} must be 1x{a.cols}, got {_shape_str(p.data)}")
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + shift.data
    n = x.shape[-1]

    def vjp(g):
        gx_hat = g * gain.data
        gx = inv / n * (
            n * gx_hat
            - gx_hat.sum(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).sum(axis=-1, keepdims=True)
        )
        return gx, g * xhat, g

    return _record(out, (a, gain, shift), vjp)


_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def gelu(a: Matrix) -> Matrix:
    """GELU, tanh approximation."""
    x = a.data
    inner = _SQRT_2_OVER_PI * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def vjp(g):
        dinner = _SQRT_2_OVER_PI * (1.0 + 3 * 0.044715 * x**2)
        d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
        return (g * d,)

    return _record(out, (a,), vjp)


def _broadcast_all(parts: Sequence[Matrix]) -> list[np.ndarray]:
    batch = [p.data.shape[0] for p in parts if p.batched]
    if not batch:
        return [p.data for p in parts]
    b = batch[0]
    if any(x != b for x in batch):
        raise ShapeError(f"batch sizes differ: {batch}")
    return [p.data if p.batched else np.broadcast_to(p.data, (b,) + p.data.shape) for p in parts]


def concat_cols(parts: Sequence[Matrix]) -> Matrix:
    rows = {p.rows for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols needs equal row counts, got {sorted(rows)}")
    arrs = _broadcast_all(parts)
    out = np.concatenate(arrs, axis=-1)
    edges = np.cumsum([0] + [p.cols for p in parts])

    def vjp(g):
        return tuple(g[..., edges[i]:edges[i + 1]] for i in range(len(parts)))

    return _record(out, tuple(parts), vjp)


def concat_rows(parts: Sequence[Matrix]) -> Matrix:
    cols = {p.cols for p in parts}
    if len(cols) != 1:
        raise ShapeError(f"concat_rows needs equal column counts, got {sorted(cols)}")
    arrs = _broadcast_all(parts)
    out = np.concatenate(arrs, axis=-2)
    edges = np.cumsum([0] + [p.rows for p in parts])

    def vjp(g):
        return tuple(g[..., edges[i]:edges[i + 1], :] for i in range(len(parts)))

    return _record(out, tuple(parts), vjp)


def take_row(a: Matrix, i: int) -> Matrix:
    """Row ``i`` as a ``1 x cols`` matrix (negative indices allowed)."""
    out = a.data[..., i:i + 1 if i != -1 else None, :]

    def vjp(g):
        full = np.zeros_like(a.data)
        full[..., i:i + 1 if i != -1 else None, :] = g
        return (full,)

    return _record(out.copy(), (a,), vjp)


def take_col(a: Matrix, j: int) -> Matrix:
    """Column ``j`` as a ``rows x 1`` matrix."""
    sl = slice(j, j + 1 if j != -1 else None)
    out = a.data[..., :, sl]

    def vjp(g):
        full = np.zeros_like(a.data)
        full[..., :, sl] = g
        return (full,)

    return _record(out.copy(), (a,), vjp)


def mean_rows(a: Matrix) -> Matrix:
    """Column-wise mean, giving a ``1 x cols`` matrix (per batch element)."""
    n = a.rows
    out = a.data.mean(axis=-2, keepdims=True)
    return _record(out, (a,), lambda g: (np.broadcast_to(g / n, a.data.shape).copy(),))


def mean_all(a: Matrix) -> Matrix:
    n = a.data.size
    out = np.array([[a.data.mean()]])
    return _record(out, (a,), lambda g: (np.full_like(a.data, g.item() / n),))


def sum_all(a: Matrix) -> Matrix:
    out = np.array([[a.data.sum()]])
    return _record(out, (a,), lambda g: (np.full_like(a.data, g.item()),))


def cross_entropy(logits: Matrix, labels) -> Matrix:
    """Mean cross-entropy of softmax(logits) against integer labels.

    ``logits`` is ``n x n_c`` or batched ``B x 1 x n_c``; one label per row
    (or per batch element).
    """
    z = logits.data.reshape(-1, logits.cols)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.shape[0] != z.shape[0]:
        raise ShapeError(f"{y.shape[0]} labels for {z.shape[0]} logit rows")
    if y.min(initial=0) < 0 or y.max(initial=0) >= z.shape[1]:
        raise ContractError("label out of range")
    zs = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(zs).sum(axis=1, keepdims=True))
    logp = zs - lse
    n = z.shape[0]
    loss = -logp[np.arange(n), y].mean()

    def vjp(g):
        p = np.exp(logp)
        p[np.arange(n), y] -= 1.0
        return ((g.item() / n) * p.reshape(logits.data.shape),)

    return _record(np.array([[loss]]), (logits,), vjp)


# ---------------------------------------------------------------------------
# optimiser
# ---------------------------------------------------------------------------

@dataclass
class AdamW:
    """Adam with decoupled weight decay; moments live in ``state``."""

    lr: float = 1e-3
    weight_decay: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    state: dict = field(default_factory=dict)

    def step(self, params: Sequence[Matrix], grads: Gradients) -> None:
        adamw_step(params, grads, self.lr, self.weight_decay, self.state,
                   betas=self.betas, eps=self.eps)


def adamw_step(
    params: Sequence[Matrix],
    grads,
    lr: float,
    weight_decay: float,
    state: dict,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """One in-place AdamW update.

    ``grads`` maps each parameter to its gradient; missing entries count as
    zero. ``state`` holds the step counter and per-parameter moments and is
    updated in place.
    """
    b1, b2 = betas
    t = state.get("t", 0) + 1
    state["t"] = t
    moments = state.setdefault("m", {})
    for p in params:
        g = grads.get(p)
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise ShapeError(
                f"gradient {_shape_str(g)} does not match parameter {_shape_str(p.data)}"
            )
        key = id(p)
        m, v = moments.get(key, (np.zeros_like(p.data), np.zeros_like(p.data)))
        if m.shape != p.data.shape:
            raise ShapeError(f"optimizer state {_shape_str(m)} does not match {_shape_str(p.data)}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        moments[key] = (m, v)
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        p.data *= 1.0 - lr * weight_decay
        p.data -= lr * mhat / (np.sqrt(vhat) + eps)
