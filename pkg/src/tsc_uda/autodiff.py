"""Small define-by-run reverse-mode autodiff over float64 numpy arrays.

Every operation returns a new :class:`Tensor` that remembers its parents and a
closure mapping the upstream gradient to one gradient per parent.  Node ids
come from a process-wide counter, so sorting the nodes reachable from a loss by
id gives a valid topological order; :func:`backward` walks it in reverse.
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor", "Graph", "backward", "no_grad", "zero_grad", "make_node",
    "matmul", "add", "sub", "mul", "scale", "neg", "relu", "tanh", "sigmoid", "log_sigmoid",
    "log", "exp", "clamp", "softmax", "log_softmax", "sum", "mean", "take",
    "reshape", "grl",
]

_node_ids = itertools.count()
_state = threading.local()


def _grad_enabled() -> bool:
    return not getattr(_state, "no_grad", False)


@contextmanager
def no_grad():
    """Evaluate without recording graph nodes (used for evaluation passes)."""
    prev = getattr(_state, "no_grad", False)
    _state.no_grad = True
    try:
        yield
    finally:
        _state.no_grad = prev


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    """Dense float64 array that can take part in a computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "node_id", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf"):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self.node_id = next(_node_ids)
        self.op = op
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_node(data: np.ndarray, parents: Iterable[Tensor], backward_fn: BackwardFn, op: str) -> Tensor:
    """Wrap an op result; ``backward_fn(upstream)`` returns one grad (or None) per parent."""
    parents = tuple(parents)
    out = Tensor.__new__(Tensor)
    out.data = data if data.dtype == np.float64 else data.astype(np.float64)
    out.node_id = next(_node_ids)
    out.op = op
    out.requires_grad = _grad_enabled() and any(p.requires_grad for p in parents)
    out.grad = None
    if out.requires_grad:
        out._parents = parents
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_same_or_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# graph + backward


class Graph:
    """Nodes reachable from an output, in insertion (node id) order."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> "Graph":
        seen: dict[int, Tensor] = {}
        stack = [output]
        while stack:
            t = stack.pop()
            if id(t) in seen:
                continue
            seen[id(t)] = t
            stack.extend(t._parents)
        return cls(sorted(seen.values(), key=lambda t: t.node_id))

    def __len__(self):
        return len(self.nodes)

    def check_order(self) -> bool:
        """True when every parent precedes its children."""
        pos = {id(t): i for i, t in enumerate(self.nodes)}
        return all(pos[id(p)] < pos[id(t)] for t in self.nodes for p in t._parents)


def backward(loss: Tensor) -> Graph:
    """Populate ``.grad`` on every tensor in ``loss``'s graph that requires it.

    Leaf gradients accumulate across calls (call :func:`zero_grad` between
    updates); interior gradients are recomputed from scratch each time.
    """
    if loss.data.size != 1 or loss.data.ndim > 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any tensor that requires gradients")
    graph = Graph.from_output(loss)
    for t in graph.nodes:
        if not t.is_leaf:
            t.grad = np.zeros_like(t.data)
    loss.grad = loss.grad + 1.0 if loss.is_leaf else np.ones_like(loss.data)

    for t in reversed(graph.nodes):
        if t._backward is None:
            continue
        for parent, g in zip(t._parents, t._backward(t.grad)):
            if g is None or not parent.requires_grad:
                continue
            if parent.grad is None:
                parent.grad = np.zeros_like(parent.data)
            parent.grad += g

    for t in graph.nodes:
        if not np.isfinite(t.data).all() or (t.grad is not None and not np.isfinite(t.grad).all()):
            raise FloatingPointError(f"non-finite value at node {t.node_id} ({t.op})")
    return graph


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        if p.grad is not None:
            p.grad.fill(0.0)


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    A, B = a.data, b.data

    def bw(g):
        return (g @ B.T if a.requires_grad else None,
                A.T @ g if b.requires_grad else None)

    return make_node(A @ B, (a, b), bw, "matmul")


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_or_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return make_node(a.data + b.data, (a, b),
                     lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_or_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return make_node(a.data - b.data, (a, b),
                     lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same_or_broadcast(a, b, "mul")
    A, B = a.data, b.data
    return make_node(A * B, (a, b),
                     lambda g: (_unbroadcast(g * B, A.shape), _unbroadcast(g * A, B.shape)), "mul")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return make_node(x.data * c, (x,), lambda g: (g * c,), "scale")


def neg(x: Tensor) -> Tensor:
    return make_node(-x.data, (x,), lambda g: (-g,), "neg")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_node(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return make_node(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return make_node(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def log_sigmoid(x: Tensor) -> Tensor:
    """``log(sigmoid(x))`` without forming the sigmoid; finite and non-vanishing for large ``-x``."""
    z = x.data
    y = np.minimum(z, 0.0) - np.log1p(np.exp(-np.abs(z)))
    return make_node(y, (x,), lambda g: (g * _sigmoid(-z),), "log_sigmoid")


def log(x: Tensor) -> Tensor:
    """Natural log; raises on non-positive input (clamp first)."""
    X = x.data
    if np.any(X <= 0):
        raise ValueError(f"log: non-positive input (min {X.min()!r})")
    return make_node(np.log(X), (x,), lambda g: (g / X,), "log")


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)
    return make_node(y, (x,), lambda g: (g * y,), "exp")


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient is zero wherever the clip is active."""
    inside = (x.data >= lo) & (x.data <= hi)
    return make_node(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,), "clamp")


def _row_softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax over the last axis, max-shifted."""
    if x.data.ndim != 2 or x.shape[1] < 2:
        raise ValueError(f"softmax expects a b x K matrix with K >= 2, got {x.shape}")
    s = _row_softmax(x.data)

    def bw(g):
        return (s * (g - (g * s).sum(axis=1, keepdims=True)),)

    return make_node(s, (x,), bw, "softmax")


def log_softmax(x: Tensor) -> Tensor:
    if x.data.ndim != 2 or x.shape[1] < 2:
        raise ValueError(f"log_softmax expects a b x K matrix with K >= 2, got {x.shape}")
    z = x.data - x.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = z - lse

    def bw(g):
        return (g - np.exp(out) * g.sum(axis=1, keepdims=True),)

    return make_node(out, (x,), bw, "log_softmax")


def sum(x: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001
    shape = x.shape

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return make_node(np.asarray(x.data.sum(axis=axis)), (x,), bw, "sum")


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    n = x.data.size if axis is None else x.shape[axis]
    return scale(sum(x, axis), 1.0 / n)


def take(x: Tensor, index) -> Tensor:
    """Pick ``x[i, index[i]]`` for every row i."""
    index = np.asarray(index, dtype=np.int64)
    if x.data.ndim != 2 or index.shape != (x.shape[0],):
        raise ValueError(f"take: need b x K matrix and b indices, got {x.shape} and {index.shape}")
    rows = np.arange(x.shape[0])
    shape = x.shape

    def bw(g):
        out = np.zeros(shape)
        np.add.at(out, (rows, index), g)
        return (out,)

    return make_node(x.data[rows, index], (x,), bw, "take")


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = x.shape
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def grl(x: Tensor, coeff: float = 1.0) -> Tensor:
    """Gradient reversal: identity forward, ``-coeff * upstream`` backward."""
    if coeff < 0:
        raise ValueError(f"grl coeff must be >= 0, got {coeff}")
    c = float(coeff)
    return make_node(x.data.copy(), (x,), lambda g: (g * -c,), "grl")
