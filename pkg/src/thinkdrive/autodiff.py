"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tensor`` wraps a contiguous numpy float64 array.  While a ``Tape`` is
active (see :func:`recording`), every operation whose result depends on a
``requires_grad`` tensor appends one record to the tape; the records are in
topological order by construction, so :meth:`Tape.backward` is a single
reverse sweep that visits each operation exactly once.  Gradients accumulate
into the ``grad`` buffer of leaf tensors (tensors created directly rather
than produced by an operation).

The graph is rebuilt on every forward pass, which keeps control flow (the
think/instant branch) trivially correct.  Everything is float64; there is no
broadcasting surprise beyond numpy's own rules, and gradients of broadcast
operands are summed back to the operand shape.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

Array = np.ndarray

_ACTIVE_TAPE: "Tape | None" = None
_CHECK_FINITE = False


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class GraphError(RuntimeError):
    """Raised when backward is asked for a value the tape never recorded."""


def set_check_finite(enabled: bool) -> None:
    """Debug switch: validate that every new tensor is free of NaN/Inf."""
    global _CHECK_FINITE
    _CHECK_FINITE = bool(enabled)


def _prepare(data) -> Array:
    arr = np.asarray(data, dtype=np.float64)
    if _CHECK_FINITE and arr.size and not np.all(np.isfinite(arr)):
        raise FloatingPointError("tensor contains NaN or Inf")
    return arr


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "tape", "_leaf")

    # numpy must defer to the reflected operators (ndarray * Tensor etc.)
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False):
        self.data = _prepare(data)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None
        self.tape: Tape | None = None
        self._leaf = True

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> Array:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def abs(self):
        return abs_(self)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)

    def gelu(self):
        return gelu(self)

    def log(self):
        return log(self)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def softmax(self, axis=-1):
        return softmax(self, axis)

    def clip(self, lo, hi):
        return clip(self, lo, hi)

    def wrap_angle(self):
        return wrap_angle(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, ax0, ax1):
        return transpose(self, ax0, ax1)

    def slice_axis(self, axis, start, stop):
        return slice_axis(self, axis, start, stop)


class TapeOp:
    __slots__ = ("inputs", "out", "backward")

    def __init__(self, inputs: tuple[Tensor, ...], out: Tensor,
                 backward: Callable[[Array], Sequence[Array | None]]):
        self.inputs = inputs
        self.out = out
        self.backward = backward


class Tape:
    """Recorded computation: an operation list in topological order."""

    def __init__(self):
        self.ops: list[TapeOp] = []

    def __len__(self) -> int:
        return len(self.ops)

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every requires_grad leaf.

        Raises for a non-scalar loss, or for a requires_grad loss that was
        produced outside this tape.  A constant loss is a no-op.  Repeated
        calls keep accumulating: callers reset leaf ``grad`` buffers.
        """
        if loss.data.size != 1:
            raise GraphError(f"loss must be scalar, got shape {loss.shape}")
        if loss.tape is not self:
            if not loss.requires_grad:
                return  # constant loss: no parameter depends on it
            if loss._leaf:
                # d(p)/d(p) = 1 for a bare parameter used as the loss
                _accumulate_into(loss, np.ones_like(loss.data))
                return
            raise GraphError("loss was not recorded on this graph")

        # id -> (tensor, pending gradient)
        pending: dict[int, list] = {id(loss): [loss, np.ones_like(loss.data)]}
        for op in reversed(self.ops):
            entry = pending.pop(id(op.out), None)
            if entry is None:
                continue
            grads = op.backward(entry[1])
            for inp, g in zip(op.inputs, grads):
                if g is None or not inp.requires_grad:
                    continue
                slot = pending.get(id(inp))
                if slot is None:
                    pending[id(inp)] = [inp, g.copy() if g.base is not None else g]
                else:
                    slot[1] = slot[1] + g
        for tensor, g in pending.values():
            if tensor.requires_grad and tensor._leaf:
                _accumulate_into(tensor, g)


def _accumulate_into(t: Tensor, g: Array) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad = t.grad + g


@contextmanager
def recording(tape: Tape):
    """Route every operation inside the block onto ``tape``."""
    global _ACTIVE_TAPE
    prev = _ACTIVE_TAPE
    _ACTIVE_TAPE = tape
    try:
        yield tape
    finally:
        _ACTIVE_TAPE = prev


@contextmanager
def no_grad():
    """Suspend recording (useful inside a recording block)."""
    global _ACTIVE_TAPE
    prev = _ACTIVE_TAPE
    _ACTIVE_TAPE = None
    try:
        yield
    finally:
        _ACTIVE_TAPE = prev


def backward(loss: Tensor) -> None:
    """Run the backward sweep of the tape that produced ``loss``."""
    if loss.tape is not None:
        loss.tape.backward(loss)
    elif loss.requires_grad and loss._leaf:
        loss.tape = None
        Tape().backward(loss)
    elif loss.requires_grad:
        raise GraphError("loss was produced outside any recording block")
    # constant loss: nothing to do


def _coerce(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _apply(out_data: Array, inputs: tuple[Tensor, ...],
           backward_fn: Callable[[Array], Sequence[Array | None]]) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = _prepare(out_data)
    out.grad = None
    out.requires_grad = any(t.requires_grad for t in inputs)
    out.tape = None
    out._leaf = not out.requires_grad
    if out.requires_grad:
        out._leaf = False
        tape = _ACTIVE_TAPE
        if tape is not None:
            out.tape = tape
            tape.ops.append(TapeOp(inputs, out, backward_fn))
    return out


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to ``shape``."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _apply(out, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data - b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _apply(out, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    out = a.data * b.data
    ad, bd = a.data, b.data

    def bw(g):
        return _unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)

    return _apply(out, (a, b), bw)


def neg(a) -> Tensor:
    a = _coerce(a)
    return _apply(-a.data, (a,), lambda g: (-g,))


def abs_(a) -> Tensor:
    a = _coerce(a)
    sign = np.sign(a.data)
    return _apply(np.abs(a.data), (a,), lambda g: (g * sign,))


def relu(a) -> Tensor:
    a = _coerce(a)
    mask = a.data > 0.0
    return _apply(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a) -> Tensor:
    a = _coerce(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bw(g):
        return (g * out * (1.0 - out),)

    return _apply(out, (a,), bw)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a) -> Tensor:
    """Tanh-approximated GELU."""
    a = _coerce(a)
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def bw(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * dinner),)

    return _apply(out, (a,), bw)


def log(a) -> Tensor:
    a = _coerce(a)
    x = a.data
    return _apply(np.log(x), (a,), lambda g: (g / x,))


def clip(a, lo: float, hi: float) -> Tensor:
    a = _coerce(a)
    mask = (a.data >= lo) & (a.data <= hi)
    return _apply(np.clip(a.data, lo, hi), (a,), lambda g: (g * mask,))


_TWO_PI = 2.0 * math.pi


def wrap_to_pi(values: Array) -> Array:
    """Wrap angles to (-pi, pi]; values already in range pass through bitwise."""
    values = np.asarray(values, dtype=np.float64)
    wrapped = values - _TWO_PI * np.round(values / _TWO_PI)
    return np.where(wrapped <= -math.pi, wrapped + _TWO_PI, wrapped)


def wrap_angle(a) -> Tensor:
    """Angle wrap with pass-through gradient (the shift is locally constant)."""
    a = _coerce(a)
    return _apply(wrap_to_pi(a.data), (a,), lambda g: (g,))


def atan2(y, x) -> Tensor:
    y, x = _coerce(y), _coerce(x)
    yd, xd = y.data, x.data
    denom = xd * xd + yd * yd

    def bw(g):
        gy = _unbroadcast(g * xd / denom, y.shape)
        gx = _unbroadcast(-g * yd / denom, x.shape)
        return gy, gx

    return _apply(np.arctan2(yd, xd), (y, x), bw)


def stop_gradient(a) -> Tensor:
    a = _coerce(a)
    return Tensor(a.data.copy())


# ---------------------------------------------------------------------------
# linear algebra and shape ops


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(
            f"matmul requires matrices, got shapes {a.shape} and {b.shape}"
        )
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {a.shape} x {b.shape}"
        )
    out = a.data @ b.data
    ad, bd = a.data, b.data

    def bw(g):
        ga = _unbroadcast(g @ bd.swapaxes(-1, -2), a.shape)
        gb = _unbroadcast(ad.swapaxes(-1, -2) @ g, b.shape)
        return ga, gb

    return _apply(out, (a, b), bw)


def transpose(a, ax0: int, ax1: int) -> Tensor:
    a = _coerce(a)
    out = a.data.swapaxes(ax0, ax1)
    return _apply(out, (a,), lambda g: (g.swapaxes(ax0, ax1),))


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = _coerce(a)
    orig = a.shape
    return _apply(a.data.reshape(shape), (a,), lambda g: (g.reshape(orig),))


def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    parts = [_coerce(t) for t in tensors]
    if not parts:
        raise ShapeError("concat of an empty sequence")
    ref = list(parts[0].shape)
    ax = axis % len(ref)
    for p in parts[1:]:
        other = list(p.shape)
        if len(other) != len(ref) or any(
            i != ax and other[i] != ref[i] for i in range(len(ref))
        ):
            raise ShapeError(
                f"concat shapes incompatible along axis {axis}: "
                f"{parts[0].shape} vs {p.shape}"
            )
    sizes = [p.shape[ax] for p in parts]
    out = np.concatenate([p.data for p in parts], axis=ax)
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        pieces = []
        for i in range(len(parts)):
            sl = [slice(None)] * g.ndim
            sl[ax] = slice(int(offsets[i]), int(offsets[i + 1]))
            pieces.append(g[tuple(sl)])
        return tuple(pieces)

    return _apply(out, tuple(parts), bw)


def slice_axis(a, axis: int, start: int, stop: int) -> Tensor:
    a = _coerce(a)
    ax = axis % a.data.ndim
    if not (0 <= start <= stop <= a.shape[ax]):
        raise ShapeError(
            f"slice [{start}:{stop}] out of range for axis {axis} of {a.shape}"
        )
    sl = [slice(None)] * a.data.ndim
    sl[ax] = slice(start, stop)
    sl = tuple(sl)
    out = a.data[sl]
    shape = a.shape

    def bw(g):
        full = np.zeros(shape, dtype=np.float64)
        full[sl] = g
        return (full,)

    return _apply(out, (a,), bw)


def _normalize_axis(axis, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"axis {axis} out of range for rank {ndim}")
    return axis % ndim


def sum_(a, axis=None) -> Tensor:
    a = _coerce(a)
    if axis is None:
        out = a.data.sum()
        shape = a.shape

        def bw(g):
            return (np.broadcast_to(g, shape).astype(np.float64),)

        return _apply(out, (a,), bw)
    ax = _normalize_axis(axis, a.data.ndim)
    out = a.data.sum(axis=ax)

    def bw_axis(g):
        return (np.broadcast_to(np.expand_dims(g, ax), a.shape).astype(np.float64),)

    return _apply(out, (a,), bw_axis)


def mean(a, axis=None) -> Tensor:
    a = _coerce(a)
    if axis is None:
        n = a.data.size
        out = a.data.mean()
        shape = a.shape

        def bw(g):
            return (np.broadcast_to(g / n, shape).astype(np.float64),)

        return _apply(out, (a,), bw)
    ax = _normalize_axis(axis, a.data.ndim)
    n = a.shape[ax]
    out = a.data.mean(axis=ax)

    def bw_axis(g):
        return (np.broadcast_to(np.expand_dims(g / n, ax), a.shape).astype(np.float64),)

    return _apply(out, (a,), bw_axis)


def softmax(a, axis: int = -1) -> Tensor:
    a = _coerce(a)
    ax = _normalize_axis(axis, a.data.ndim)
    shifted = a.data - a.data.max(axis=ax, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=ax, keepdims=True)

    def bw(g):
        dot = (g * out).sum(axis=ax, keepdims=True)
        return (out * (g - dot),)

    return _apply(out, (a,), bw)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean / unit variance, then affine."""
    x, gamma, beta = _coerce(x), _coerce(gamma), _coerce(beta)
    n = x.shape[-1]
    if gamma.shape != (n,) or beta.shape != (n,):
        raise ShapeError(
            f"layer_norm scale/shift must have shape ({n},), got "
            f"{gamma.shape} and {beta.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data
    gdata = gamma.data

    def bw(g):
        dxhat = g * gdata
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (dxhat - m1 - xhat * m2)
        axes = tuple(range(g.ndim - 1))
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        return dx, dgamma, dbeta

    return _apply(out, (x, gamma, beta), bw)


# ---------------------------------------------------------------------------
# numerical gradient verification


class GradCheckReport:
    """Per-parameter worst relative error between autodiff and differences."""

    def __init__(self, tol: float):
        self.tol = tol
        self.max_rel_err: dict[str, float] = {}

    @property
    def worst(self) -> float:
        return max(self.max_rel_err.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol

    def failures(self) -> dict[str, float]:
        return {k: v for k, v in self.max_rel_err.items() if v > self.tol}

    def __repr__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"GradCheckReport({status}, worst={self.worst:.3e}, tol={self.tol:.0e})"


def grad_check(f: Callable[[], Tensor], params: dict[str, Tensor],
               h: float = 1e-5, tol: float = 1e-4) -> GradCheckReport:
    """Compare autodiff gradients of ``f()`` against central differences.

    ``f`` must be deterministic and rebuild its graph from ``params`` on
    every call.  The numeric estimate is (f(p+h) - f(p-h)) / 2h per
    coordinate; relative error uses max(|analytic|, |numeric|, 1e-8) as the
    denominator.  The report never raises: failures are listed.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    for p in params.values():
        p.zero_grad()
    tape = Tape()
    with recording(tape):
        loss = f()
    tape.backward(loss)
    analytic = {
        name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
        for name, p in params.items()
    }

    report = GradCheckReport(tol)
    for name, p in params.items():
        worst = 0.0
        flat = p.data.reshape(-1)
        aflat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f().data)
            flat[i] = orig - h
            fm = float(f().data)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            a = aflat[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > worst:
                worst = rel
        report.max_rel_err[name] = worst
    return report
