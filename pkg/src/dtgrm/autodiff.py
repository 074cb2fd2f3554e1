"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every operation takes and returns :class:`Tensor`. A tensor that depends on
any ``requires_grad`` input records its parents and a backward closure;
:func:`backward` walks the recorded graph in reverse topological order.

Layout convention for sequences is time-major: a sequence of ``T`` frames
with ``d`` channels is a ``(T, d)`` array.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float64


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

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

    def __getitem__(self, key):
        return index(self, key)

    def sum(self, axis=None):
        return sum_(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    if dtype is None and isinstance(x, (int, float)):
        return Tensor(np.asarray(x, dtype=DEFAULT_DTYPE))
    return Tensor(x, dtype=dtype)


def _finite(arr):
    # one reduction instead of an elementwise mask; NaN and Inf both propagate
    return bool(np.isfinite(arr.sum()))


def _result(data, parents, backward_fn, opname):
    if not _finite(data):
        raise FloatingPointError(f"{opname} produced non-finite values")
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
        out.name = opname
    return out


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _coerce(a, b):
    # python scalars adopt the dtype of the tensor they meet
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype))
    return a, b


# ---------------------------------------------------------------- elementwise


def add(a, b):
    a, b = _coerce(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), bw, "add")


def sub(a, b):
    a, b = _coerce(a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), bw, "sub")


def mul(a, b):
    a, b = _coerce(a, b)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), bw, "mul")


def neg(a):
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def square(a):
    return _result(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,), "square")


def relu(a):
    a = as_tensor(a)
    pos = a.data > 0

    def bw(g):
        return (g * pos,)

    return _result(np.where(pos, a.data, 0).astype(a.dtype, copy=False), (a,), bw, "relu")


def exp(a):
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    """Natural log. Non-positive inputs are a domain error; clamp first."""
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise ValueError("log of non-positive value; clamp the input first")
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def clamp(a, min=None, max=None):
    """Clip into ``[min, max]``; gradient is 1 inside the interval, 0 outside."""
    a = as_tensor(a)
    lo = -np.inf if min is None else min
    hi = np.inf if max is None else max
    inside = (a.data >= lo) & (a.data <= hi)

    def bw(g):
        return (g * inside,)

    return _result(np.clip(a.data, lo, hi), (a,), bw, "clamp")


# ---------------------------------------------------------------- reductions


def sum_(a, axis=None):
    def bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)

    return _result(np.asarray(a.data.sum(axis=axis)), (a,), bw, "sum")


def mean(a, axis=None):
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])

    def bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, a.shape),)

    return _result(np.asarray(a.data.mean(axis=axis)), (a,), bw, "mean")


# ---------------------------------------------------------------- shape / indexing


def reshape(a, shape):
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def _is_fancy(key):
    if not isinstance(key, tuple):
        key = (key,)
    return any(isinstance(k, (np.ndarray, list)) for k in key)


def index(a, key):
    """Generic ``a[key]``; repeated fancy indices accumulate their gradients."""
    fancy = _is_fancy(key)

    def bw(g):
        out = np.zeros_like(a.data)
        if fancy:
            np.add.at(out, key, g)
        else:
            out[key] = g
        return (out,)

    return _result(np.asarray(a.data[key]), (a,), bw, "index")


def index_rows(a, idx, valid=None):
    """Gather rows ``a[idx]`` along axis 0.

    ``idx`` may be any integer array; the result has shape
    ``idx.shape + a.shape[1:]``. Where ``valid`` is False the gathered row
    is zero and receives no gradient.
    """
    idx = np.asarray(idx)
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        safe = np.where(valid, idx, 0)
    else:
        safe = idx
    if safe.size and (safe.min() < 0 or safe.max() >= a.shape[0]):
        raise IndexError("row index out of range")
    out = a.data[safe]
    if valid is not None:
        keep = valid.reshape(valid.shape + (1,) * (a.ndim - 1))
        out = np.where(keep, out, 0).astype(a.dtype, copy=False)

    def bw(g):
        if valid is not None:
            g = g * keep
        grad = np.zeros_like(a.data)
        np.add.at(grad, safe.reshape(-1), g.reshape((-1,) + a.shape[1:]))
        return (grad,)

    return _result(out, (a,), bw, "index_rows")


def gather_neighbors(x, offset):
    """Stack ``x[t - offset], x[t], x[t + offset]`` into ``(T, 3, d)``.

    Rows falling outside ``[0, T)`` are zero and receive no gradient.
    """
    x = as_tensor(x)
    if x.ndim != 2:
        raise ValueError("gather_neighbors expects a (T, d) tensor")
    out = _shift_stack(x.data, 3, offset)
    return _result(out, (x,), lambda g: (_unshift_stack(g, offset),), "gather_neighbors")


def weighted_rows(w, X):
    """Per-frame convex combination: ``(T, n)`` weights times ``(T, n, d)`` rows -> ``(T, d)``."""
    w, X = as_tensor(w), as_tensor(X)
    if w.shape != X.shape[:2]:
        raise ValueError(f"weights {w.shape} do not match rows {X.shape}")
    out = np.einsum("tn,tnd->td", w.data, X.data)

    def bw(g):
        return np.einsum("td,tnd->tn", g, X.data), w.data[:, :, None] * g[:, None, :]

    return _result(out, (w, X), bw, "weighted_rows")


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return _result(data, tuple(tensors), bw, "concat")


# ---------------------------------------------------------------- linear algebra


def matmul(a, b):
    """Matrix product with numpy broadcasting over leading batch axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul needs operands with at least 2 dimensions")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")

    def bw(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _result(a.data @ b.data, (a, b), bw, "matmul")


def _shift_stack(x, ks, dilation):
    """Return (T, ks, d) where slot m holds x[t + (m - half) * dilation] or 0."""
    T, d = x.shape
    half = (ks - 1) // 2
    out = np.zeros((T, ks, d), dtype=x.dtype)
    for m in range(ks):
        off = (m - half) * dilation
        if off >= 0:
            if off < T:
                out[: T - off, m] = x[off:]
        elif -off < T:
            out[-off:, m] = x[: T + off]
    return out


def _unshift_stack(cols, dilation):
    T, ks, d = cols.shape
    half = (ks - 1) // 2
    out = np.zeros((T, d), dtype=cols.dtype)
    for m in range(ks):
        off = (m - half) * dilation
        if off >= 0:
            if off < T:
                out[off:] += cols[: T - off, m]
        elif -off < T:
            out[: T + off] += cols[-off:, m]
    return out


def conv1d(x, w, dilation=1, bias=None):
    """Dilated 1D convolution with symmetric zero padding (same length).

    ``x`` is ``(T, d_in)``, ``w`` is ``(ks, d_in, d_out)`` with odd ``ks``;
    ``output[t] = sum_m x[t + (m - (ks-1)/2) * dilation] @ w[m]``.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 2 or w.ndim != 3:
        raise ValueError("conv1d expects x (T, d_in) and w (ks, d_in, d_out)")
    ks, d_in, d_out = w.shape
    if ks % 2 != 1:
        raise ValueError("kernel size must be odd")
    if x.shape[1] != d_in:
        raise ValueError(f"conv1d channel mismatch: input {x.shape[1]}, filter {d_in}")
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    T = x.shape[0]
    cols = _shift_stack(x.data, ks, dilation)
    out = cols.reshape(T, ks * d_in) @ w.data.reshape(ks * d_in, d_out)
    parents = (x, w)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = (x, w, bias)

    def bw(g):
        gw = (cols.reshape(T, ks * d_in).T @ g).reshape(w.shape)
        gcols = (g @ w.data.reshape(ks * d_in, d_out).T).reshape(T, ks, d_in)
        gx = _unshift_stack(gcols, dilation)
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=0)

    return _result(out, parents, bw, "conv1d")


def linear(x, w, b=None):
    """Per-row affine map ``x @ w + b`` (a 1x1 convolution in time-major layout)."""
    out = matmul(x, w)
    return out if b is None else add(out, b)


# ---------------------------------------------------------------- normalisation


def softmax(a, axis=-1, mask=None):
    """Softmax along ``axis``; masked-out entries are exactly zero.

    ``mask`` is a boolean array broadcastable to ``a`` (True = keep). Every
    slice along ``axis`` needs at least one unmasked entry.
    """
    a = as_tensor(a)
    x = a.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        if not np.all(mask.any(axis=axis)):
            raise ValueError("softmax slice is fully masked")
        x = np.where(mask, x, -np.inf)
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _result(out, (a,), bw, "softmax")


def cosine_rows(a, b, eps=1e-8):
    """Cosine similarity along the last axis, ``a.b / max(|a||b|, eps)``.

    Leading axes broadcast, so ``(T, 1, d)`` against ``(T, 3, d)`` yields
    ``(T, 3)``.
    """
    a, b = as_tensor(a), as_tensor(b)
    na = np.sqrt((a.data * a.data).sum(axis=-1))
    nb = np.sqrt((b.data * b.data).sum(axis=-1))
    dot = (a.data * b.data).sum(axis=-1)
    prod = na * nb
    active = prod > eps
    den = np.where(active, prod, eps)
    out = dot / den

    def bw(g):
        # active: d/da = b / den - out * a / |a|^2 ; floored: d/da = b / eps
        ge = (g / den)[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            ka = np.where(active, g * out / (na * na), 0.0)[..., None]
            kb = np.where(active, g * out / (nb * nb), 0.0)[..., None]
        ga = ge * b.data - ka * a.data
        gb = ge * a.data - kb * b.data
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(out, (a, b), bw, "cosine_rows")


# ---------------------------------------------------------------- backward


def _toposort(root):
    order = []
    state = {}
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        key = id(node)
        if done:
            state[key] = 2
            order.append(node)
            continue
        s = state.get(key)
        if s == 2:
            continue
        if s == 1:
            raise RuntimeError("cycle detected in recorded computation")
        state[key] = 1
        stack.append((node, True))
        for p in node._parents:
            ps = state.get(id(p))
            if ps == 1:
                raise RuntimeError("cycle detected in recorded computation")
            if ps is None and p.requires_grad:
                stack.append((p, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(t) into ``t.grad`` for every reachable leaf tensor.

    Leaves are tensors created directly (parameters, inputs) rather than by
    an operation. Calling twice without zeroing adds the gradients.
    """
    if loss.data.size != 1 or loss.data.ndim != 0:
        raise ValueError("backward needs a scalar loss")
    if not loss.requires_grad:
        return
    order = _toposort(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = np.array(g) if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            pg = np.asarray(pg, dtype=parent.dtype)
            k = id(parent)
            grads[k] = pg if k not in grads else grads[k] + pg
    for node in order:
        if node._backward is None and node.grad is not None and not _finite(node.grad):
            raise FloatingPointError(f"non-finite gradient in {node.name or 'tensor'}")
