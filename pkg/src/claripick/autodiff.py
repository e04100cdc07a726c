"""Dense float64 tensors with reverse-mode differentiation on an explicit tape.

Forward passes build ``Node`` graphs. Nodes whose ancestry touches a
``Parameter`` leaf are appended to a ``Tape`` in creation order, which is a
valid topological order; ``backward`` walks the tape in reverse and pushes
gradient contributions into each parameter's ``grad`` buffer. Gradients
accumulate across backward calls until ``reset_gradients`` is invoked.

Inference runs the same forward code with leaves created off-tape
(``tape=None``), so nothing is recorded and nothing can be differentiated.
"""

from __future__ import annotations

import numpy as np

from .errors import GraphError, NonFiniteError, ShapeError

EPS_NORM = 1e-12


def _as_array(data):
    arr = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("tensor data contains NaN or Inf")
    return arr


class Tensor:
    """Immutable dense float64 array, validated finite at construction."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.ascontiguousarray(_as_array(data))
        arr.setflags(write=False)
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple:
        return self._data.shape

    @property
    def size(self) -> int:
        return self._data.size

    def item(self) -> float:
        if self._data.size != 1:
            raise ShapeError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self._data.reshape(()))

    def tolist(self):
        return self._data.tolist()

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    def __eq__(self, other):
        return isinstance(other, Tensor) and np.array_equal(self._data, other._data)

    def __hash__(self):
        return hash((self.shape, self._data.tobytes()))


class Parameter:
    """Named trainable value with an additively accumulated gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value):
        self.name = name
        self.value = _as_array(value).copy()
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def reset_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def reset_gradients(params):
    for p in params:
        p.reset_grad()


class Tape:
    """Ordered record of the primitive operations of one forward pass."""

    __slots__ = ("nodes",)

    def __init__(self):
        self.nodes = []

    def __len__(self):
        return len(self.nodes)


class Node:
    """One value in a forward computation; may carry a gradient push rule."""

    __slots__ = ("value", "parents", "_push", "_tape", "param", "degenerate")

    def __init__(self, value, parents=(), push=None, tape=None, param=None):
        self.value = value
        self.parents = parents
        self._push = push
        self._tape = tape
        self.param = param
        self.degenerate = False

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() on non-scalar node of shape {self.shape}")
        return float(self.value.reshape(()))

    def __repr__(self):
        return f"Node(shape={self.shape})"


def _make(value, parents, push):
    tape = None
    for p in parents:
        t = p._tape
        if t is not None:
            if tape is None:
                tape = t
            elif tape is not t:
                raise GraphError("operands were recorded on different tapes")
    node = Node(value, parents, push, tape)
    if tape is not None:
        tape.nodes.append(node)
    return node


def constant(value, tape=None) -> Node:
    """Wrap a plain value; contributes no gradient."""
    return Node(_as_array(value), (), None, None)


def leaf(tape, param: Parameter) -> Node:
    """Enter a parameter into a forward pass; backward adds into param.grad."""

    def push(g, acc):
        param.grad += g

    node = Node(param.value, (), push, tape, param=param)
    if tape is not None:
        tape.nodes.append(node)
    return node


def _coerce(x) -> Node:
    if isinstance(x, Node):
        return x
    if isinstance(x, Tensor):
        return Node(x.data, (), None, None)
    return constant(x)


def _accumulate(acc, node, g):
    key = id(node)
    if key in acc:
        acc[key] = acc[key] + g
    else:
        acc[key] = g


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Node:
    a, b = _coerce(a), _coerce(b)
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")

    def push(g, acc):
        _accumulate(acc, a, g)
        _accumulate(acc, b, g)

    return _make(a.value + b.value, (a, b), push)


def sub(a, b) -> Node:
    a, b = _coerce(a), _coerce(b)
    if a.shape != b.shape:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} differ")

    def push(g, acc):
        _accumulate(acc, a, g)
        _accumulate(acc, b, -g)

    return _make(a.value - b.value, (a, b), push)


def mul(a, b) -> Node:
    a, b = _coerce(a), _coerce(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")

    def push(g, acc):
        _accumulate(acc, a, g * b.value)
        _accumulate(acc, b, g * a.value)

    return _make(a.value * b.value, (a, b), push)


def scale(x, c: float) -> Node:
    x = _coerce(x)
    c = float(c)

    def push(g, acc):
        _accumulate(acc, x, g * c)

    return _make(x.value * c, (x,), push)


def shift(x, c: float) -> Node:
    x = _coerce(x)
    c = float(c)

    def push(g, acc):
        _accumulate(acc, x, g)

    return _make(x.value + c, (x,), push)


def matmul(a, b) -> Node:
    a, b = _coerce(a), _coerce(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} x {b.shape}")

    def push(g, acc):
        _accumulate(acc, a, g @ b.value.T)
        _accumulate(acc, b, a.value.T @ g)

    return _make(a.value @ b.value, (a, b), push)


def linear(x, w, b) -> Node:
    """1-D affine map: x[d] @ w[d,n] + b[n]."""
    x, w, b = _coerce(x), _coerce(w), _coerce(b)
    if x.value.ndim != 1 or w.value.ndim != 2 or x.shape[0] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"linear: incompatible shapes x{x.shape} w{w.shape} b{b.shape}")

    def push(g, acc):
        _accumulate(acc, x, w.value @ g)
        _accumulate(acc, w, np.outer(x.value, g))
        _accumulate(acc, b, g)

    return _make(x.value @ w.value + b.value, (x, w, b), push)


def affine_pair(x, wx, h, wh, b) -> Node:
    """Fused recurrent-cell gate input: x @ wx + h @ wh + b, all 1-D vectors."""
    x, wx, h, wh, b = (_coerce(v) for v in (x, wx, h, wh, b))
    if x.shape[0] != wx.shape[0] or h.shape[0] != wh.shape[0] or wx.shape[1] != wh.shape[1] or b.shape != (wx.shape[1],):
        raise ShapeError(
            f"affine_pair: incompatible shapes x{x.shape} wx{wx.shape} h{h.shape} wh{wh.shape} b{b.shape}"
        )

    def push(g, acc):
        _accumulate(acc, x, wx.value @ g)
        _accumulate(acc, wx, np.outer(x.value, g))
        _accumulate(acc, h, wh.value @ g)
        _accumulate(acc, wh, np.outer(h.value, g))
        _accumulate(acc, b, g)

    return _make(x.value @ wx.value + h.value @ wh.value + b.value, (x, wx, h, wh, b), push)


def tanh(x) -> Node:
    x = _coerce(x)
    y = np.tanh(x.value)

    def push(g, acc):
        _accumulate(acc, x, g * (1.0 - y * y))

    return _make(y, (x,), push)


def sigmoid(x) -> Node:
    x = _coerce(x)
    y = 1.0 / (1.0 + np.exp(-x.value))

    def push(g, acc):
        _accumulate(acc, x, g * y * (1.0 - y))

    return _make(y, (x,), push)


def relu(x) -> Node:
    x = _coerce(x)

    def push(g, acc):
        _accumulate(acc, x, g * (x.value > 0.0))

    return _make(np.maximum(x.value, 0.0), (x,), push)


def log(x) -> Node:
    x = _coerce(x)
    if np.any(x.value <= 0.0):
        raise ShapeError("log: input must be strictly positive")

    def push(g, acc):
        _accumulate(acc, x, g / x.value)

    return _make(np.log(x.value), (x,), push)


def softmax(x) -> Node:
    """Softmax over a 1-D vector, stable under constant logit shifts."""
    x = _coerce(x)
    if x.value.ndim != 1:
        raise ShapeError(f"softmax: expected 1-D input, got shape {x.shape}")
    shifted = x.value - np.max(x.value)
    e = np.exp(shifted)
    y = e / e.sum()

    def push(g, acc):
        _accumulate(acc, x, y * (g - np.dot(g, y)))

    return _make(y, (x,), push)


def concat(xs) -> Node:
    xs = [_coerce(x) for x in xs]
    if not xs:
        raise ShapeError("concat: empty input list")
    for x in xs:
        if x.value.ndim != 1:
            raise ShapeError(f"concat: expected 1-D parts, got shape {x.shape}")
    sizes = [x.shape[0] for x in xs]
    offsets = np.cumsum([0] + sizes)

    def push(g, acc):
        for x, a, b in zip(xs, offsets[:-1], offsets[1:]):
            _accumulate(acc, x, g[a:b])

    return _make(np.concatenate([x.value for x in xs]), tuple(xs), push)


def embedding_row(tape, table: Parameter, index: int) -> Node:
    """Look up one row of an embedding table; gradient lands on that row only."""
    if not 0 <= index < table.value.shape[0]:
        raise ShapeError(f"embedding_row: index {index} out of range for table {table.shape}")
    idx = int(index)

    def push(g, acc):
        table.grad[idx] += g

    node = Node(table.value[idx].copy(), (), push, tape, param=table)
    if tape is not None:
        tape.nodes.append(node)
    return node


def select(x, index: int) -> Node:
    """Pick one entry of a 1-D vector as a scalar node."""
    x = _coerce(x)
    if x.value.ndim != 1 or not 0 <= index < x.shape[0]:
        raise ShapeError(f"select: index {index} invalid for shape {x.shape}")
    idx = int(index)

    def push(g, acc):
        buf = np.zeros_like(x.value)
        buf[idx] = g
        _accumulate(acc, x, buf)

    return _make(x.value[idx].reshape(()), (x,), push)


def slice_1d(x, start: int, stop: int) -> Node:
    """Contiguous sub-vector of a 1-D node."""
    x = _coerce(x)
    if x.value.ndim != 1 or not 0 <= start < stop <= x.shape[0]:
        raise ShapeError(f"slice_1d: [{start}:{stop}] invalid for shape {x.shape}")

    def push(g, acc):
        buf = np.zeros_like(x.value)
        buf[start:stop] = g
        _accumulate(acc, x, buf)

    return _make(x.value[start:stop].copy(), (x,), push)


def _reduce(x, axis, kind):
    x = _coerce(x)
    if axis is not None and not 0 <= axis < x.value.ndim:
        raise ShapeError(f"reduce: axis {axis} invalid for shape {x.shape}")
    if kind == "mean":
        y = x.value.mean(axis=axis)

        def push(g, acc):
            n = x.value.size if axis is None else x.shape[axis]
            _accumulate(acc, x, np.broadcast_to(np.expand_dims(g, axis) if axis is not None else g, x.shape) / n)

    else:
        op = np.max if kind == "max" else np.min
        y = op(x.value, axis=axis)
        arg = (np.argmax if kind == "max" else np.argmin)(x.value, axis=axis)

        def push(g, acc):
            buf = np.zeros_like(x.value)
            if axis is None:
                buf.flat[arg] = g
            else:
                expanded = np.expand_dims(arg, axis)
                np.put_along_axis(buf, expanded, np.expand_dims(g, axis), axis=axis)
            _accumulate(acc, x, buf)

    return _make(np.asarray(y), (x,), push)


def reduce_mean(x, axis=None) -> Node:
    return _reduce(x, axis, "mean")


def reduce_max(x, axis=None) -> Node:
    return _reduce(x, axis, "max")


def reduce_min(x, axis=None) -> Node:
    return _reduce(x, axis, "min")


def mean_all(xs) -> Node:
    """Mean of a list of scalar nodes (batch reduction)."""
    if not xs:
        raise ShapeError("mean_all: empty input list")
    total = xs[0]
    for x in xs[1:]:
        total = add(total, x)
    return scale(total, 1.0 / len(xs))


def dropout(x, rate: float, rng, train: bool) -> Node:
    """Inverted dropout; identity when not training or rate is zero."""
    x = _coerce(x)
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout: rate {rate} outside [0,1)")
    if not train or rate == 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def push(g, acc):
        _accumulate(acc, x, g * mask)

    return _make(x.value * mask, (x,), push)


def cosine(u, v) -> Node:
    """Cosine similarity of two 1-D vectors, clamped to [-1, 1].

    Both inputs (near-)zero is not an error: the result is 0 with the node's
    ``degenerate`` flag set, so scoring an untrained encoder cannot crash.
    """
    u, v = _coerce(u), _coerce(v)
    if u.value.ndim != 1 or u.shape != v.shape or u.shape[0] < 1:
        raise ShapeError(f"cosine: expected equal 1-D shapes, got {u.shape} and {v.shape}")
    nu = float(np.linalg.norm(u.value))
    nv = float(np.linalg.norm(v.value))
    cu = max(nu, EPS_NORM)
    cv = max(nv, EPS_NORM)
    raw = float(np.dot(u.value, v.value) / (cu * cv))
    degenerate = nu < EPS_NORM and nv < EPS_NORM
    value = 0.0 if degenerate else min(1.0, max(-1.0, raw))

    def push(g, acc):
        if degenerate or abs(raw) >= 1.0:
            return
        gs = float(g)
        du = v.value / (cu * cv) - (raw / cu**2) * u.value if nu > EPS_NORM else np.zeros_like(u.value)
        dv = u.value / (cu * cv) - (raw / cv**2) * v.value if nv > EPS_NORM else np.zeros_like(v.value)
        _accumulate(acc, u, gs * du)
        _accumulate(acc, v, gs * dv)

    node = _make(np.asarray(value, dtype=np.float64), (u, v), push)
    node.degenerate = degenerate
    return node


def zeros(shape, tape=None) -> Node:
    return constant(np.zeros(shape))


# ---------------------------------------------------------------------------
# reverse accumulation


def backward(loss: Node) -> None:
    """Accumulate d(loss)/d(param) into every parameter the loss depends on."""
    if loss._tape is None:
        raise GraphError("backward: node was not recorded on a tape")
    if loss.value.size != 1:
        raise GraphError(f"backward: loss must be scalar, got shape {loss.shape}")
    acc = {id(loss): np.ones_like(loss.value)}
    for node in reversed(loss._tape.nodes):
        g = acc.pop(id(node), None)
        if g is None or node._push is None:
            continue
        node._push(g, acc)
