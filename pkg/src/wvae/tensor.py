"""Dense float64 tensors with tape-ordered reverse-mode differentiation.

Every tensor produced by an operation on a tensor that requires gradients
records its parents and a backward closure. Creation order is stamped on
each node, so sorting the ancestors of a loss by that stamp gives a valid
topological order for the reverse sweep.

Broadcasting is deliberately limited to scalar-with-tensor; use
:func:`tile_rows` to repeat a bias vector over a batch.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

_node_counter = itertools.count()

UNARY_OPS = ("neg", "exp", "log", "sigmoid", "tanh", "relu", "square", "sqrt", "softplus")
BINARY_OPS = ("add", "sub", "mul")


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class DomainError(ValueError):
    """Input lies outside the domain of a function (log or sqrt of a negative)."""


class Tensor:
    """n-dimensional float64 array, optionally attached to a differentiation graph.

    Leaves created with ``requires_grad=True`` are parameters: after
    :func:`backward` their ``grad`` holds the accumulated gradient.
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward", "_order")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None
        self._order = next(_node_counter)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    # operator sugar
    def __add__(self, other):
        return elementwise("add", self, other)

    def __radd__(self, other):
        return elementwise("add", as_tensor(other), self)

    def __sub__(self, other):
        return elementwise("sub", self, other)

    def __rsub__(self, other):
        return elementwise("sub", as_tensor(other), self)

    def __mul__(self, other):
        return elementwise("mul", self, other)

    def __rmul__(self, other):
        return elementwise("mul", as_tensor(other), self)

    def __neg__(self):
        return elementwise("neg", self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, op: str, parents: Sequence[Tensor], grad_fn) -> Tensor:
    out = Tensor(data)
    out.op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = grad_fn
    return out


def _is_scalar(t: Tensor) -> bool:
    return t.data.ndim == 0 or t.data.size == 1 and t.data.ndim <= 1


def _unbroadcast(g: np.ndarray, t: Tensor) -> np.ndarray:
    if g.shape == t.shape:
        return g
    return np.asarray(g.sum()).reshape(t.shape)


def _check_binary(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape and not (_is_scalar(a) or _is_scalar(b)):
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def elementwise(op: str, a, b=None) -> Tensor:
    """Apply an elementwise operation.

    ``op`` is one of add, sub, mul (binary) or neg, exp, log, sigmoid, tanh,
    relu, square, sqrt, softplus (unary). Binary operands must share a shape
    unless one of them is a scalar.
    """
    a = as_tensor(a)
    if op in BINARY_OPS:
        if b is None:
            raise ValueError(f"{op} needs two operands")
        b = as_tensor(b)
        _check_binary(a, b, op)
        x, y = a.data, b.data
        if op == "add":
            return _make(x + y, op, (a, b), lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)))
        if op == "sub":
            return _make(x - y, op, (a, b), lambda g: (_unbroadcast(g, a), _unbroadcast(-g, b)))
        return _make(x * y, op, (a, b), lambda g: (_unbroadcast(g * y, a), _unbroadcast(g * x, b)))

    if op not in UNARY_OPS:
        raise ValueError(f"unknown elementwise op {op!r}")
    if b is not None:
        raise ValueError(f"{op} takes a single operand")
    x = a.data
    if op == "neg":
        return _make(-x, op, (a,), lambda g: (-g,))
    if op == "exp":
        y = np.exp(x)
        return _make(y, op, (a,), lambda g: (g * y,))
    if op == "log":
        if np.any(x < 0):
            raise DomainError("log of negative value")
        with np.errstate(divide="ignore"):
            y = np.log(x)
        return _make(y, op, (a,), lambda g: (g / x,))
    if op == "sqrt":
        if np.any(x < 0):
            raise DomainError("sqrt of negative value")
        y = np.sqrt(x)
        return _make(y, op, (a,), lambda g: (g * 0.5 / y,))
    if op == "sigmoid":
        y = _sigmoid(x)
        return _make(y, op, (a,), lambda g: (g * y * (1.0 - y),))
    if op == "tanh":
        y = np.tanh(x)
        return _make(y, op, (a,), lambda g: (g * (1.0 - y * y),))
    if op == "relu":
        mask = x > 0
        return _make(np.where(mask, x, 0.0), op, (a,), lambda g: (g * mask,))
    if op == "square":
        return _make(x * x, op, (a,), lambda g: (2.0 * g * x,))
    # softplus(x) = log(1 + e^x), computed without overflow
    y = np.logaddexp(0.0, x)
    return _make(y, op, (a,), lambda g: (g * _sigmoid(x),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def add(a, b):
    return elementwise("add", a, b)


def sub(a, b):
    return elementwise("sub", a, b)


def mul(a, b):
    return elementwise("mul", a, b)


def neg(a):
    return elementwise("neg", a)


def exp(a):
    return elementwise("exp", a)


def log(a):
    return elementwise("log", a)


def sigmoid(a):
    return elementwise("sigmoid", a)


def tanh(a):
    return elementwise("tanh", a)


def relu(a):
    return elementwise("relu", a)


def square(a):
    return elementwise("square", a)


def sqrt(a):
    return elementwise("sqrt", a)


def softplus(a):
    return elementwise("softplus", a)


def matmul(a, b) -> Tensor:
    """Matrix product of an m×k and a k×n tensor."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul needs 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    x, y = a.data, b.data

    def grad_fn(g):
        ga = g @ y.T if a.requires_grad else None
        gb = x.T @ g if b.requires_grad else None
        return ga, gb

    return _make(x @ y, "matmul", (a, b), grad_fn)


def linear(x, weight, bias) -> Tensor:
    """Fused ``x @ weight.T + tile_rows(bias, N)`` for an N×in input and out×in weight."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: input {x.shape} does not match weight {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"linear: bias {bias.shape} does not match weight {weight.shape}")
    xd, wd = x.data, weight.data

    def grad_fn(g):
        gx = g @ wd if x.requires_grad else None
        gw = g.T @ xd if weight.requires_grad else None
        gb = g.sum(axis=0) if bias.requires_grad else None
        return gx, gw, gb

    out = xd @ wd.T
    out += bias.data
    return _make(out, "linear", (x, weight, bias), grad_fn)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose needs a 2-d tensor, got {a.shape}")
    return _make(a.data.T, "transpose", (a,), lambda g: (np.ascontiguousarray(g.T),))


def tensor_sum(a, axis: int | None = None) -> Tensor:
    """Sum over all elements (``axis=None``) or along one axis."""
    a = as_tensor(a)
    if axis is None:
        return _make(np.asarray(a.data.sum()), "sum", (a,), lambda g: (np.full(a.shape, float(g)),))
    y = a.data.sum(axis=axis)
    return _make(y, "sum", (a,), lambda g: (np.broadcast_to(np.expand_dims(g, axis), a.shape),))


def mean(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else a.shape[axis]
    return tensor_sum(a, axis) * (1.0 / n)


def columns(a, start: int, stop: int) -> Tensor:
    """Columns ``start:stop`` of a 2-d tensor."""
    a = as_tensor(a)
    if a.data.ndim != 2 or not 0 <= start < stop <= a.shape[1]:
        raise ShapeError(f"bad column slice {start}:{stop} for shape {a.shape}")

    def grad_fn(g):
        full = np.zeros(a.shape)
        full[:, start:stop] = g
        return (full,)

    return _make(a.data[:, start:stop], "columns", (a,), grad_fn)


def tile_rows(a, n: int) -> Tensor:
    """Stack a 1-d tensor ``n`` times into an n×len(a) matrix."""
    a = as_tensor(a)
    if a.data.ndim != 1:
        raise ShapeError(f"tile_rows needs a 1-d tensor, got {a.shape}")
    return _make(np.tile(a.data, (n, 1)), "tile_rows", (a,), lambda g: (g.sum(axis=0),))


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp to ``[lo, hi]``; gradient is zero where clamping is active."""
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), "clip", (a,), lambda g: (g * inside,))


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``grad`` of every parameter leaf."""
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    nodes: dict[int, Tensor] = {}
    stack = [loss]
    while stack:
        t = stack.pop()
        if id(t) in nodes:
            continue
        nodes[id(t)] = t
        stack.extend(p for p in t._parents if p.requires_grad)
    tape = sorted(nodes.values(), key=lambda t: t._order, reverse=True)

    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape)}
    for t in tape:
        g = grads.pop(id(t), None)
        if g is None:
            continue
        if t.is_leaf:
            t.grad = (g if g.flags.writeable else g.copy()) if t.grad is None else t.grad + g
            continue
        for parent, pg in zip(t._parents, t._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg


def grad_check(f: Callable[[], Tensor], params: Iterable[Tensor], eps: float = 1e-5) -> float:
    """Compare analytic gradients with central differences.

    ``f`` re-evaluates the scalar loss from the current parameter values.
    Returns max |analytic - numeric| / max(1, |numeric|) over all entries.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = f()
    if not np.isfinite(loss.data).all():
        raise FloatingPointError("loss is not finite")
    backward(loss)

    worst = 0.0
    for p in params:
        analytic = np.zeros(p.shape) if p.grad is None else p.grad
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f().item()
            flat[i] = orig - eps
            down = f().item()
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise FloatingPointError("loss is not finite under perturbation")
            numeric = (up - down) / (2 * eps)
            err = abs(analytic.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
