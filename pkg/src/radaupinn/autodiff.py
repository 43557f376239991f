"""A small tape-free reverse-mode autodiff engine over numpy arrays.

Every :class:`Tensor` produced from differentiable inputs remembers its parents
and a closure that pushes its gradient back to them. ``backward`` walks the
graph in reverse topological order. Operations on plain arrays (no tensor
requiring gradients involved) stay plain, so the same model code runs on
numpy input at full speed.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _data(x):
    return x.data if isinstance(x, Tensor) else x


def _needs_grad(*xs):
    return any(isinstance(x, Tensor) and x.requires_grad for x in xs)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor({self.data!r}, requires_grad={self.requires_grad})"

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + g

    def backward(self, seed=None):
        """Accumulate d(self)/d(leaf) into every leaf's ``grad``."""
        if seed is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            seed = np.ones_like(self.data)
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(seed)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None):
        return tsum(self, axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


def _make(data, parents, backward):
    live = tuple(p for p in parents if isinstance(p, Tensor) and p.requires_grad)
    if not live:
        return Tensor(data)
    return Tensor(data, True, live, backward)


def add(a, b):
    if not _needs_grad(a, b):
        return np.add(_data(a), _data(b))
    ad, bd = _data(a), _data(b)
    ashape, bshape = np.shape(ad), np.shape(bd)

    def backward(g):
        if isinstance(a, Tensor) and a.requires_grad:
            a._accumulate(_unbroadcast(g, ashape))
        if isinstance(b, Tensor) and b.requires_grad:
            b._accumulate(_unbroadcast(g, bshape))

    return _make(ad + bd, (a, b), backward)


def neg(a):
    if not _needs_grad(a):
        return -_data(a)

    def backward(g):
        a._accumulate(-g)

    return _make(-a.data, (a,), backward)


def mul(a, b):
    if not _needs_grad(a, b):
        return np.multiply(_data(a), _data(b))
    ad, bd = _data(a), _data(b)

    def backward(g):
        if isinstance(a, Tensor) and a.requires_grad:
            a._accumulate(_unbroadcast(g * bd, np.shape(ad)))
        if isinstance(b, Tensor) and b.requires_grad:
            b._accumulate(_unbroadcast(g * ad, np.shape(bd)))

    return _make(ad * bd, (a, b), backward)


def div(a, b):
    if not _needs_grad(a, b):
        return np.divide(_data(a), _data(b))
    ad, bd = _data(a), _data(b)
    out = ad / bd

    def backward(g):
        if isinstance(a, Tensor) and a.requires_grad:
            a._accumulate(_unbroadcast(g / bd, np.shape(ad)))
        if isinstance(b, Tensor) and b.requires_grad:
            b._accumulate(_unbroadcast(-g * out / bd, np.shape(bd)))

    return _make(out, (a, b), backward)


def power(a, exponent):
    if isinstance(exponent, Tensor):
        raise TypeError("only constant exponents are supported")
    if not _needs_grad(a):
        return np.power(_data(a), exponent)
    ad = a.data

    def backward(g):
        a._accumulate(g * exponent * ad ** (exponent - 1))

    return _make(ad**exponent, (a,), backward)


def _swap(x):
    return np.swapaxes(x, -1, -2)


def matmul(a, b):
    if not _needs_grad(a, b):
        return np.matmul(_data(a), _data(b))
    ad, bd = _data(a), _data(b)
    out = ad @ bd
    a2 = ad if ad.ndim > 1 else ad[np.newaxis, :]
    b2 = bd if bd.ndim > 1 else bd[:, np.newaxis]
    promoted = ad.ndim < 2 or bd.ndim < 2
    shape2 = np.broadcast_shapes(a2.shape[:-2], b2.shape[:-2]) + (a2.shape[-2], b2.shape[-1])

    def backward(g):
        g2 = np.reshape(g, shape2) if promoted else g
        if isinstance(a, Tensor) and a.requires_grad:
            ga = _unbroadcast(g2 @ _swap(b2), a2.shape)
            a._accumulate(ga.reshape(ad.shape))
        if isinstance(b, Tensor) and b.requires_grad:
            gb = _unbroadcast(_swap(a2) @ g2, b2.shape)
            b._accumulate(gb.reshape(bd.shape))

    return _make(out, (a, b), backward)


def _is_basic_index(idx):
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, np.integer, slice)) or i is Ellipsis or i is None
               for i in items)


def getitem(a, idx):
    if not _needs_grad(a):
        return _data(a)[idx]
    shape = a.data.shape
    basic = _is_basic_index(idx)

    def backward(g):
        full = np.zeros(shape)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        a._accumulate(full)

    return _make(a.data[idx], (a,), backward)


def tsum(a, axis=None):
    if not _needs_grad(a):
        return np.sum(_data(a), axis=axis)
    shape = a.data.shape

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, shape))

    return _make(a.data.sum(axis=axis), (a,), backward)


def reshape(a, shape):
    if not _needs_grad(a):
        return np.reshape(_data(a), shape)
    old = a.data.shape

    def backward(g):
        a._accumulate(g.reshape(old))

    return _make(a.data.reshape(shape), (a,), backward)


def transpose(a, axes=None):
    """Swap the last two axes, or permute by ``axes`` when given."""
    if axes is None:
        if not _needs_grad(a):
            return np.swapaxes(_data(a), -1, -2)

        def backward(g):
            a._accumulate(_swap(g))

        return _make(_swap(a.data), (a,), backward)

    axes = tuple(axes)
    if not _needs_grad(a):
        return np.transpose(_data(a), axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        a._accumulate(np.transpose(g, inverse))

    return _make(np.transpose(a.data, axes), (a,), backward)


def stack(items, axis=0):
    """``np.stack`` that records a graph node when any item is a tensor."""
    items = list(items)
    if not _needs_grad(*items):
        return np.stack([_data(x) for x in items], axis=axis)
    datas = [np.asarray(_data(x), dtype=np.float64) for x in items]
    out = np.stack(datas, axis=axis)
    ax = axis if axis >= 0 else axis + out.ndim

    def backward(g):
        for k, x in enumerate(items):
            if isinstance(x, Tensor) and x.requires_grad:
                x._accumulate(np.take(g, k, axis=ax))

    return _make(out, tuple(items), backward)


def concatenate(items, axis=0):
    items = list(items)
    if not _needs_grad(*items):
        return np.concatenate([_data(x) for x in items], axis=axis)
    datas = [np.asarray(_data(x), dtype=np.float64) for x in items]
    out = np.concatenate(datas, axis=axis)
    bounds = np.cumsum([0] + [d.shape[axis] for d in datas])

    def backward(g):
        for k, x in enumerate(items):
            if isinstance(x, Tensor) and x.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(bounds[k], bounds[k + 1])
                x._accumulate(g[tuple(sl)])

    return _make(out, tuple(items), backward)


def _unary(fn, dfn_from):
    """Build an elementwise op; ``dfn_from(x, y)`` gives dy/dx."""

    def op(a):
        if not _needs_grad(a):
            return fn(_data(a))
        x = a.data
        y = fn(x)

        def backward(g):
            a._accumulate(g * dfn_from(x, y))

        return _make(y, (a,), backward)

    return op


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


sigmoid = _unary(_sigmoid, lambda x, y: y * (1.0 - y))
tanh = _unary(np.tanh, lambda x, y: 1.0 - y * y)
sin = _unary(np.sin, lambda x, y: np.cos(x))
cos = _unary(np.cos, lambda x, y: -np.sin(x))
exp = _unary(np.exp, lambda x, y: y)
log = _unary(np.log, lambda x, y: 1.0 / x)


def value_and_grad(fn, params):
    """Evaluate scalar ``fn(tensors)`` and its gradient w.r.t. a dict of arrays.

    ``params`` maps names to arrays; ``fn`` receives the same mapping with
    each array wrapped as a gradient-tracking :class:`Tensor`. Returns
    ``(value, grads)`` where ``grads`` mirrors ``params``.
    """
    leaves = {k: Tensor(v, requires_grad=True) for k, v in params.items()}
    out = fn(leaves)
    if not isinstance(out, Tensor):
        # objective does not depend on the parameters
        value = np.asarray(out, dtype=np.float64)
        if value.size != 1:
            raise ValueError("objective must be scalar")
        return float(value), {k: np.zeros_like(np.asarray(v, dtype=np.float64))
                              for k, v in params.items()}
    if out.data.size != 1:
        raise ValueError(f"objective must be scalar, got shape {out.data.shape}")
    out.backward()
    grads = {}
    for k, leaf in leaves.items():
        grads[k] = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
    return float(out.data), grads
