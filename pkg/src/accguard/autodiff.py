"""Minimal reverse-mode automatic differentiation over numpy arrays.

Only the handful of primitives needed by the quantized training graph are
implemented. Rounding ops carry straight-through gradients (derivative 1);
clip passes gradient inside [n, p] and blocks it outside. A module-level
"relaxed" switch turns the rounding ops into identities so analytic
gradients can be checked against finite differences of a smooth function.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_RELAXED = False


@contextmanager
def relaxed():
    """Within this context rounding ops are the identity (continuous relaxation)."""
    global _RELAXED
    prev = _RELAXED
    _RELAXED = True
    try:
        yield
    finally:
        _RELAXED = prev


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    # Sum over axes added or broadcast by numpy's rules.
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad=False, parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._backward = None
        self._parents = parents

    @property
    def shape(self):
        return self.data.shape

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += _unbroadcast(g, self.data.shape)

    # -- graph construction helpers ------------------------------------

    @staticmethod
    def _lift(x):
        return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))

    def __add__(self, other):
        other = Tensor._lift(other)
        out = Tensor(self.data + other.data, parents=(self, other))

        def back(g):
            self._accum(g)
            other._accum(g)

        out._backward = back
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, parents=(self,))
        out._backward = lambda g: self._accum(-g)
        return out

    def __sub__(self, other):
        return self + (-Tensor._lift(other))

    def __rsub__(self, other):
        return Tensor._lift(other) + (-self)

    def __mul__(self, other):
        other = Tensor._lift(other)
        out = Tensor(self.data * other.data, parents=(self, other))

        def back(g):
            self._accum(g * other.data)
            other._accum(g * self.data)

        out._backward = back
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._lift(other)
        out = Tensor(self.data / other.data, parents=(self, other))

        def back(g):
            self._accum(g / other.data)
            other._accum(-g * self.data / (other.data * other.data))

        out._backward = back
        return out

    def __rtruediv__(self, other):
        return Tensor._lift(other) / self

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), parents=(self,))

        def back(g):
            gg = np.asarray(g)
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            self._accum(np.broadcast_to(gg, self.data.shape).copy())

        out._backward = back
        return out

    def mean(self):
        return self.sum() * (1.0 / self.data.size)

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), parents=(self,))
        out._backward = lambda g: self._accum(g.reshape(self.data.shape))
        return out

    def abs(self):
        out = Tensor(np.abs(self.data), parents=(self,))
        out._backward = lambda g: self._accum(g * np.sign(self.data))
        return out

    def exp2(self):
        out = Tensor(np.exp2(self.data), parents=(self,))
        out._backward = lambda g: self._accum(g * out.data * np.log(2.0))
        return out

    def relu(self):
        out = Tensor(np.maximum(self.data, 0.0), parents=(self,))
        out._backward = lambda g: self._accum(g * (self.data > 0))
        return out

    # -- backward pass ---------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo, seen = [], set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            topo.append(t)

        visit(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(topo):
            if t._backward is not None and t.requires_grad:
                t._backward(t.grad if t.grad is not None else np.zeros_like(t.data))


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; gradient routes to a when a <= b, else to b."""
    a, b = Tensor._lift(a), Tensor._lift(b)
    mask = a.data <= b.data
    out = Tensor(np.where(mask, a.data, b.data), parents=(a, b))

    def back(g):
        a._accum(g * mask)
        b._accum(g * ~mask)

    out._backward = back
    return out


def linear(x: Tensor, w: Tensor) -> Tensor:
    """x @ w.T for x (B, K) and w (C, K)."""
    out = Tensor(x.data @ w.data.T, parents=(x, w))

    def back(g):
        x._accum(g @ w.data)
        w._accum(g.T @ x.data)

    out._backward = back
    return out


def round_ste(x: Tensor) -> Tensor:
    """Half-to-even rounding with straight-through gradient."""
    data = x.data if _RELAXED else np.round(x.data)
    out = Tensor(data, parents=(x,))
    out._backward = lambda g: x._accum(g)
    return out


def trunc_ste(x: Tensor) -> Tensor:
    """Round-toward-zero with straight-through gradient."""
    data = x.data if _RELAXED else np.trunc(x.data)
    out = Tensor(data, parents=(x,))
    out._backward = lambda g: x._accum(g)
    return out


def clip_ste(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip with pass-through gradient inside [lo, hi], zero outside."""
    mask = (x.data >= lo) & (x.data <= hi)
    out = Tensor(np.clip(x.data, lo, hi), parents=(x,))
    out._backward = lambda g: x._accum(g * mask)
    return out


def cross_entropy_logits(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy; labels are integer class indices."""
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    probs = ez / ez.sum(axis=1, keepdims=True)
    n = z.shape[0]
    nll = -np.log(probs[np.arange(n), labels] + 1e-300)
    out = Tensor(nll.mean(), parents=(logits,))

    def back(g):
        grad = probs.copy()
        grad[np.arange(n), labels] -= 1.0
        logits._accum(float(g) * grad / n)

    out._backward = back
    return out
