"""A small dense reverse-mode autodiff engine over numpy arrays.

Every operation returns a new :class:`Tensor` that remembers its inputs and a
closure mapping the output gradient to input gradients. :func:`backward`
orders the reachable operations topologically (the tape) and replays it in
reverse. Only row-vector-over-matrix broadcasting is supported; any other
shape mismatch raises :class:`DimensionError`.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionError

__all__ = [
    "Tensor", "Adam", "backward", "tape", "xavier_init", "detach",
    "matmul", "add", "sub", "mul", "div", "scale", "neg", "concat", "concat_rows",
    "gather_rows", "scatter_rows", "repeat_rows", "leaky_relu", "prelu", "relu",
    "row_l2_norm", "row_dot", "log", "power", "clamp", "clamp_min", "absolute",
    "sum", "mean", "sparse_spmm", "segment_softmax", "segment_sum",
]


class Tensor:
    """Array value with an optional gradient buffer.

    Leaves created with ``requires_grad=True`` are parameters; their ``grad``
    accumulates across :func:`backward` calls until cleared.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None, op=""):
        data = np.asarray(data)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        self.data = data
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = _parents
        self._backward = _backward
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op or 'leaf'!r}{tag})"

    __add__ = lambda self, other: add(self, other)
    __sub__ = lambda self, other: sub(self, other)
    __mul__ = lambda self, other: mul(self, other) if isinstance(other, Tensor) else scale(self, other)
    __rmul__ = lambda self, other: scale(self, other)
    __truediv__ = lambda self, other: div(self, other) if isinstance(other, Tensor) else scale(self, 1.0 / other)
    __neg__ = lambda self: neg(self)
    __matmul__ = lambda self, other: matmul(self, other)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn, op):
    """Record an op only if some input needs a gradient; otherwise return a constant."""
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, None, tuple(parents), backward_fn, op)
    return Tensor(data, False, None, (), None, op)


def detach(x: Tensor) -> Tensor:
    return Tensor(x.data)


# ---------------------------------------------------------------------------
# tape


def tape(loss: Tensor):
    """Topologically ordered list of recorded ops reachable from ``loss``."""
    order, seen = [], set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate ``d loss / d leaf`` into every reachable trainable leaf."""
    if loss.data.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg


# ---------------------------------------------------------------------------
# elementwise and linear algebra


def _check(cond, op, *tensors):
    if not cond:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise DimensionError(f"{op}: incompatible shapes {shapes}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check(a.data.ndim == 2 and b.data.ndim == 2 and a.shape[1] == b.shape[0], "matmul", a, b)
    ad, bd = a.data, b.data

    def _bw(g):
        return (g @ bd.T if a.requires_grad else None,
                ad.T @ g if b.requires_grad else None)
    return _make(ad @ bd, (a, b), _bw, "matmul")


def _broadcast_kind(a, b, op):
    if a.shape == b.shape:
        return None
    if a.data.ndim == 2 and b.data.ndim == 2 and b.shape[0] == 1 and b.shape[1] == a.shape[1]:
        return "b"
    if a.data.ndim == 2 and b.data.ndim == 2 and a.shape[0] == 1 and a.shape[1] == b.shape[1]:
        return "a"
    _check(False, op, a, b)


def _unbroadcast(g, kind, side):
    return g.sum(axis=0, keepdims=True) if kind == side else g


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    kind = _broadcast_kind(a, b, "add")

    def _bw(g):
        return _unbroadcast(g, kind, "a"), _unbroadcast(g, kind, "b")
    return _make(a.data + b.data, (a, b), _bw, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    kind = _broadcast_kind(a, b, "sub")

    def _bw(g):
        return _unbroadcast(g, kind, "a"), -_unbroadcast(g, kind, "b")
    return _make(a.data - b.data, (a, b), _bw, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    kind = _broadcast_kind(a, b, "mul")
    ad, bd = a.data, b.data

    def _bw(g):
        return _unbroadcast(g * bd, kind, "a"), _unbroadcast(g * ad, kind, "b")
    return _make(ad * bd, (a, b), _bw, "mul")


def div(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check(a.shape == b.shape, "div", a, b)
    ad, bd = a.data, b.data

    def _bw(g):
        return g / bd, -g * ad / (bd * bd)
    return _make(ad / bd, (a, b), _bw, "div")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def leaky_relu(a: Tensor, negative_slope: float = 0.2) -> Tensor:
    pos = a.data > 0
    out = np.where(pos, a.data, a.data * negative_slope)
    return _make(out, (a,), lambda g: (np.where(pos, g, g * negative_slope),), "leaky_relu")


def relu(a: Tensor) -> Tensor:
    return leaky_relu(a, 0.0)


def prelu(a: Tensor, slope: Tensor) -> Tensor:
    """Leaky ReLU with a learnable scalar slope (``slope`` has one element)."""
    _check(slope.data.size == 1, "prelu", a, slope)
    s = slope.data.reshape(-1)[0]
    pos = a.data > 0
    neg_part = np.where(pos, 0, a.data)
    out = np.where(pos, a.data, a.data * s)

    def _bw(g):
        return np.where(pos, g, g * s), np.sum(g * neg_part).reshape(slope.shape)
    return _make(out, (a, slope), _bw, "prelu")


def log(a: Tensor) -> Tensor:
    ad = a.data
    return _make(np.log(ad), (a,), lambda g: (g / ad,), "log")


def power(a: Tensor, p: float) -> Tensor:
    ad, p = a.data, float(p)
    return _make(ad ** p, (a,), lambda g: (g * p * ad ** (p - 1),), "power")


def absolute(a: Tensor) -> Tensor:
    ad = a.data
    return _make(np.abs(ad), (a,), lambda g: (g * np.sign(ad),), "abs")


def clamp(a: Tensor, lo: float = -np.inf, hi: float = np.inf) -> Tensor:
    """Clip into ``[lo, hi]``; gradient passes only where no bound is active."""
    keep = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi).astype(a.dtype), (a,),
                 lambda g: (np.where(keep, g, 0),), "clamp")


def clamp_min(a: Tensor, lo: float) -> Tensor:
    return clamp(a, lo=lo)


def sum(a: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape = a.shape
    return _make(np.sum(a.data), (a,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")


def mean(a: Tensor) -> Tensor:
    shape, n = a.shape, a.data.size
    if n == 0:
        raise DimensionError("mean of an empty tensor")
    return _make(np.sum(a.data) / n, (a,),
                 lambda g: (np.broadcast_to(g / n, shape).copy(),), "mean")


def row_l2_norm(a: Tensor, floor: float = 0.0) -> Tensor:
    """Per-row euclidean norm as an ``(n, 1)`` column, floored at ``floor``."""
    _check(a.data.ndim == 2, "row_l2_norm", a)
    ad = a.data
    raw = np.sqrt(np.sum(ad * ad, axis=1, keepdims=True))
    live = raw > floor
    out = np.where(live, raw, floor).astype(ad.dtype)

    def _bw(g):
        safe = np.where(live, raw, 1.0)
        return (np.where(live, g / safe, 0) * ad,)
    return _make(out, (a,), _bw, "row_l2_norm")


def row_dot(a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape == b.shape and a.data.ndim == 2, "row_dot", a, b)
    ad, bd = a.data, b.data
    return _make(np.sum(ad * bd, axis=1, keepdims=True), (a, b),
                 lambda g: (g * bd, g * ad), "row_dot")


# ---------------------------------------------------------------------------
# structural ops


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    other = 1 - axis
    _check(all(t.data.ndim == 2 for t in tensors)
           and len({t.shape[other] for t in tensors}) == 1, "concat", *tensors)
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _bw(g):
        return tuple(np.split(g, splits, axis=axis))
    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), _bw,
                 "concat")


def concat_rows(tensors) -> Tensor:
    return concat(tensors, axis=0)


def gather_rows(a: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    n = a.shape[0]
    _check(idx.size == 0 or (idx.min() >= -n and idx.max() < n), "gather_rows", a)

    def _bw(g):
        return (_segment_reduce_sum(g, idx % n if n else idx, n),)
    return _make(a.data[idx], (a,), _bw, "gather_rows")


def repeat_rows(row: Tensor, n: int) -> Tensor:
    """Stack ``n`` copies of a ``(1, d)`` row."""
    _check(row.data.ndim == 2 and row.shape[0] == 1, "repeat_rows", row)
    return _make(np.repeat(row.data, n, axis=0), (row,),
                 lambda g: (g.sum(axis=0, keepdims=True),), "repeat_rows")


def scatter_rows(base: Tensor, idx, src: Tensor) -> Tensor:
    """Copy of ``base`` with rows ``idx`` replaced by the rows of ``src``.

    ``idx`` must not contain duplicates.
    """
    idx = np.asarray(idx, dtype=np.int64)
    _check(base.data.ndim == 2 and src.data.ndim == 2 and src.shape[0] == len(idx)
           and src.shape[1] == base.shape[1], "scatter_rows", base, src)
    out = base.data.copy()
    out[idx] = src.data

    def _bw(g):
        gb = g.copy()
        gb[idx] = 0
        return gb, g[idx]
    return _make(out, (base, src), _bw, "scatter_rows")


# ---------------------------------------------------------------------------
# sparse / segment ops


def _csr(adj, values):
    return sp.csr_matrix((values, adj.indices, adj.indptr), shape=(adj.num_nodes, adj.num_nodes))


def sparse_spmm(adj, x: Tensor, values: Tensor | None = None) -> Tensor:
    """``A @ x`` for a CSR matrix ``adj``.

    ``values`` (shape ``(nnz,)`` or ``(nnz, 1)``) replaces ``adj.data`` and is
    differentiated, which is how attention coefficients are applied.
    """
    _check(x.data.ndim == 2 and x.shape[0] == adj.num_nodes, "sparse_spmm", x)
    if values is None:
        vals = adj.data.astype(x.dtype, copy=False)
        parents = (x,)
    else:
        _check(values.data.size == adj.nnz, "sparse_spmm", values, x)
        vals = values.data.reshape(-1)
        parents = (x, values)
    mat = _csr(adj, vals)
    xd = x.data
    rows = adj.row if values is not None and values.requires_grad else None

    def _bw(g):
        gx = mat.T @ g if x.requires_grad else None
        if values is None:
            return (gx,)
        gv = None
        if values.requires_grad:
            gv = np.einsum("ij,ij->i", g[rows], xd[adj.indices]).reshape(values.shape)
        return gx, gv
    return _make(mat @ xd, parents, _bw, "sparse_spmm")


def _is_sorted(ids):
    return ids.size < 2 or bool(np.all(ids[1:] >= ids[:-1]))


def _segment_reduce_sum(x, ids, n):
    if x.ndim == 1:
        return np.bincount(ids, weights=x, minlength=n).astype(x.dtype, copy=False)
    return np.stack([np.bincount(ids, weights=x[:, k], minlength=n)
                     for k in range(x.shape[1])], axis=1).astype(x.dtype, copy=False)


def _segment_max(x, ids, n):
    counts = np.bincount(ids, minlength=n)
    if _is_sorted(ids) and np.all(counts > 0):
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        return np.maximum.reduceat(x, starts, axis=0)
    out = np.full((n,) + x.shape[1:], -np.inf, dtype=x.dtype)
    np.maximum.at(out, ids, x)
    return out


def segment_sum(x: Tensor, segment_ids, num_segments: int) -> Tensor:
    ids = np.asarray(segment_ids, dtype=np.int64)
    _check(x.shape[0] == len(ids), "segment_sum", x)
    return _make(_segment_reduce_sum(x.data, ids, num_segments), (x,),
                 lambda g: (g[ids],), "segment_sum")


def segment_softmax(logits: Tensor, segment_ids, num_segments: int | None = None) -> Tensor:
    """Softmax over groups of entries sharing a segment id (per column)."""
    ids = np.asarray(segment_ids, dtype=np.int64)
    _check(logits.shape[0] == len(ids) and logits.data.ndim in (1, 2), "segment_softmax", logits)
    if num_segments is None:
        num_segments = int(ids.max()) + 1 if ids.size else 0
    x = logits.data
    shifted = x - _segment_max(x, ids, num_segments)[ids]
    ex = np.exp(shifted)
    out = ex / _segment_reduce_sum(ex, ids, num_segments)[ids]

    def _bw(g):
        inner = _segment_reduce_sum(g * out, ids, num_segments)[ids]
        return (out * (g - inner),)
    return _make(out, (logits,), _bw, "segment_softmax")


# ---------------------------------------------------------------------------
# initialization and optimization


def xavier_init(shape, seed=None, dtype=np.float64, name=None) -> Tensor:
    """Glorot-uniform tensor in ``[-sqrt(6/(fan_in+fan_out)), +...]``.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if len(shape) != 2:
        raise DimensionError(f"xavier_init expects a 2-D shape, got {shape}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    fan_in, fan_out = shape
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True,
                  name=name)


class Adam:
    """Adam with bias correction, updating ``Tensor.data`` in place from ``Tensor.grad``."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, grads=None):
        """Apply one update. ``grads`` defaults to each parameter's ``.grad``."""
        if grads is None:
            grads = [p.grad for p in self.params]
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g is None:
                g = np.zeros_like(p.data)
            if g.shape != p.shape:
                raise DimensionError(f"adam: grad shape {g.shape} != param shape {p.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data = (p.data - update).astype(p.dtype, copy=False)
