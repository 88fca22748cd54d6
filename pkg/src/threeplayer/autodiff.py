"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Node` wraps a numpy array together with the primitive that produced
it. Calling :func:`backward` on a scalar node fills ``.grad`` on every node
that requires a gradient and returns the gradients of the named leaves.

Broadcasting is deliberately narrow: a binary elementwise op accepts operands
of identical shape, an operand whose shape equals the other's shape without
the leading batch axis, or a 0-d scalar.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "Node", "ShapeError", "leaf", "const", "leaves",
    "add", "sub", "mul", "neg", "matmul", "relu", "tanh", "sigmoid", "log",
    "exp", "mean", "sum", "concat", "clip", "log_softmax", "reshape",
    "slice_cols", "gradient_reversal", "backward", "finite_difference_gradient",
]


class ShapeError(ValueError):
    pass


class Node:
    __slots__ = ("value", "op", "parents", "grad", "requires_grad", "name", "_backward")

    def __init__(self, value, op="leaf", parents=(), requires_grad=False, name=None, backward_fn=None):
        self.value = value
        self.op = op
        self.parents = tuple(parents)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._backward = backward_fn

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Node<{self.op}{label} shape={self.value.shape}>"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return arr


def leaf(value, name=None) -> Node:
    """A differentiable input (a parameter)."""
    return Node(np.array(value, dtype=np.float64), requires_grad=True, name=name)


def const(value) -> Node:
    if isinstance(value, Node):
        return value
    return Node(_as_array(value), op="const")


def leaves(params: Mapping[str, np.ndarray]) -> dict[str, Node]:
    return {name: leaf(v, name=name) for name, v in params.items()}


def _wrap(x) -> Node:
    return x if isinstance(x, Node) else const(x)


def _make(value, op, parents, backward_fn) -> Node:
    req = False
    for p in parents:  # plain loop: this runs for every node built
        if p.requires_grad:
            req = True
            break
    return Node(value, op=op, parents=parents, requires_grad=req,
                backward_fn=backward_fn if req else None)


def _accumulate(node: Node, g: np.ndarray) -> None:
    if node.requires_grad:
        node.grad += g


def _check_broadcast(op, a: Node, b: Node) -> None:
    sa, sb = a.value.shape, b.value.shape
    if sa == sb or sa == () or sb == ():
        return
    if sa[1:] == sb or sb[1:] == sa:
        return
    raise ShapeError(f"{op}: incompatible shapes {sa} and {sb}")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape == ():
        return np.asarray(g.sum())
    if g.shape[1:] == shape:
        return g.sum(axis=0)
    raise ShapeError(f"cannot reduce gradient of shape {g.shape} to {shape}")


# --- elementwise binary ------------------------------------------------------

def add(a, b) -> Node:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("add", a, b)

    def bw(out):
        _accumulate(a, _unbroadcast(out.grad, a.shape))
        _accumulate(b, _unbroadcast(out.grad, b.shape))

    return _make(a.value + b.value, "add", (a, b), bw)


def sub(a, b) -> Node:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("sub", a, b)

    def bw(out):
        _accumulate(a, _unbroadcast(out.grad, a.shape))
        _accumulate(b, _unbroadcast(-out.grad, b.shape))

    return _make(a.value - b.value, "sub", (a, b), bw)


def mul(a, b) -> Node:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("mul", a, b)

    def bw(out):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(out.grad * b.value, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(out.grad * a.value, b.shape))

    return _make(a.value * b.value, "mul", (a, b), bw)


def neg(a) -> Node:
    a = _wrap(a)

    def bw(out):
        _accumulate(a, -out.grad)

    return _make(-a.value, "neg", (a,), bw)


def matmul(a, b) -> Node:
    a, b = _wrap(a), _wrap(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bw(out):
        if a.requires_grad:
            _accumulate(a, out.grad @ b.value.T)
        if b.requires_grad:
            _accumulate(b, a.value.T @ out.grad)

    return _make(a.value @ b.value, "matmul", (a, b), bw)


# --- elementwise unary -------------------------------------------------------

def relu(a) -> Node:
    a = _wrap(a)
    mask = a.value > 0

    def bw(out):
        _accumulate(a, out.grad * mask)

    return _make(np.where(mask, a.value, 0.0), "relu", (a,), bw)


def tanh(a) -> Node:
    a = _wrap(a)
    y = np.tanh(a.value)

    def bw(out):
        _accumulate(a, out.grad * (1.0 - y * y))

    return _make(y, "tanh", (a,), bw)


def sigmoid(a) -> Node:
    a = _wrap(a)
    # split on sign so exp never overflows
    v = a.value
    e = np.exp(-np.abs(v))
    y = np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def bw(out):
        _accumulate(a, out.grad * y * (1.0 - y))

    return _make(y, "sigmoid", (a,), bw)


def log(a) -> Node:
    a = _wrap(a)
    if np.any(a.value <= 0):
        bad = a.value[a.value <= 0].ravel()[0]
        raise ValueError(f"log: nonpositive input (e.g. {bad!r}); clamp before taking the log")

    def bw(out):
        _accumulate(a, out.grad / a.value)

    return _make(np.log(a.value), "log", (a,), bw)


def exp(a) -> Node:
    a = _wrap(a)
    y = np.exp(a.value)

    def bw(out):
        _accumulate(a, out.grad * y)

    return _make(y, "exp", (a,), bw)


def clip(a, lo: float, hi: float) -> Node:
    a = _wrap(a)
    inside = (a.value >= lo) & (a.value <= hi)

    def bw(out):
        _accumulate(a, out.grad * inside)

    return _make(np.clip(a.value, lo, hi), "clip", (a,), bw)


# --- reductions and structure -------------------------------------------------

def sum(a, axis: int | None = None) -> Node:  # noqa: A001
    a = _wrap(a)

    def bw(out):
        g = out.grad if axis is None else np.expand_dims(out.grad, axis)
        _accumulate(a, np.broadcast_to(g, a.shape))

    return _make(np.asarray(a.value.sum(axis=axis)), "sum", (a,), bw)


def mean(a, axis: int | None = None) -> Node:
    a = _wrap(a)
    count = a.value.size if axis is None else a.shape[axis]
    if count == 0:
        raise ShapeError(f"mean: empty input of shape {a.shape}")

    def bw(out):
        g = out.grad if axis is None else np.expand_dims(out.grad, axis)
        _accumulate(a, np.broadcast_to(g / count, a.shape))

    return _make(np.asarray(a.value.mean(axis=axis)), "mean", (a,), bw)


def concat(nodes: Iterable, axis: int = -1) -> Node:
    nodes = tuple(_wrap(n) for n in nodes)
    try:
        value = np.concatenate([n.value for n in nodes], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: incompatible shapes {[n.shape for n in nodes]}") from exc
    bounds = np.cumsum([n.shape[axis] for n in nodes])[:-1]

    def bw(out):
        for n, g in zip(nodes, np.split(out.grad, bounds, axis=axis)):
            _accumulate(n, g)

    return _make(value, "concat", nodes, bw)


def reshape(a, shape) -> Node:
    a = _wrap(a)
    try:
        value = a.value.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from exc

    def bw(out):
        _accumulate(a, out.grad.reshape(a.shape))

    return _make(value, "reshape", (a,), bw)


def slice_cols(a, start: int, stop: int) -> Node:
    a = _wrap(a)
    if a.value.ndim != 2 or not 0 <= start < stop <= a.shape[1]:
        raise ShapeError(f"slice_cols: bad range [{start}, {stop}) for shape {a.shape}")

    def bw(out):
        g = np.zeros(a.shape)
        g[:, start:stop] = out.grad
        _accumulate(a, g)

    return _make(a.value[:, start:stop], "slice_cols", (a,), bw)


def log_softmax(a) -> Node:
    """Row-wise log-softmax over the last axis."""
    a = _wrap(a)
    shifted = a.value - a.value.max(axis=-1, keepdims=True)
    y = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(y)

    def bw(out):
        _accumulate(a, out.grad - probs * out.grad.sum(axis=-1, keepdims=True))

    return _make(y, "log_softmax", (a,), bw)


def gradient_reversal(x, lam: float) -> Node:
    """Identity going forward; multiplies the incoming gradient by ``-lam``."""
    if not lam >= 0:
        raise ValueError(f"gradient_reversal: lambda must be nonnegative, got {lam!r}")
    x = _wrap(x)
    scale = -float(lam)

    def bw(out):
        _accumulate(x, scale * out.grad)

    return _make(x.value, "grl", (x,), bw)


# --- backward ----------------------------------------------------------------

def _topo_order(root: Node) -> list[Node]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Node, wrt: Mapping[str, Node] | None = None) -> dict[str, np.ndarray]:
    """Differentiate a scalar ``root``.

    Every reachable node's gradient is zeroed before propagation, so repeated
    calls never accumulate across calls. Returns a map of named leaf
    gradients; when ``wrt`` is given the map covers exactly those leaves, with
    zeros for leaves the root does not depend on.
    """
    if root.value.size != 1 or root.value.ndim > 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.shape}")
    order = _topo_order(root) if root.requires_grad else []
    for node in order:
        node.grad = np.zeros(node.value.shape)
    if wrt is not None:
        for node in wrt.values():
            node.grad = np.zeros(node.value.shape)
    if order:
        root.grad = np.ones(root.value.shape)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node)

    if wrt is not None:
        return {name: node.grad for name, node in wrt.items()}
    return {n.name: n.grad for n in order if n.op == "leaf" and n.name is not None}


def finite_difference_gradient(
    f: Callable[[dict[str, np.ndarray]], float],
    params: Mapping[str, np.ndarray],
    eps: float = 1e-3,
) -> dict[str, np.ndarray]:
    """Central differences of a scalar function of a parameter store."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    work = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    grads = {}
    for name, arr in work.items():
        g = np.zeros(arr.shape)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(f(work))
            flat[i] = orig - eps
            lo = float(f(work))
            flat[i] = orig
            if not (math.isfinite(hi) and math.isfinite(lo)):
                idx = [int(j) for j in np.unravel_index(i, arr.shape)]
                raise ValueError(f"non-finite evaluation at {name}{idx}")
            gflat[i] = (hi - lo) / (2.0 * eps)
        grads[name] = g
    return grads
