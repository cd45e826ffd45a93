"""A small reverse-mode tape over float64 numpy arrays.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure pushing its gradient back to them.  ``loss.backward()`` walks the
graph in reverse topological order.  Only tensors created with
``requires_grad=True`` (or derived from one) accumulate ``.grad``.
"""
from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            stack.extend((p, False) for p in node._parents)
        self.grad = np.asarray(grad, dtype=np.float64).reshape(self.shape) + (0 if self.grad is None else self.grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    __add__ = lambda self, other: add(self, other)
    __mul__ = lambda self, other: mul(self, other)
    __matmul__ = lambda self, other: matmul(self, other)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t, g):
    if t.requires_grad:
        t.grad = g.copy() if t.grad is None else t.grad + g


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _node(data, parents, backward):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _node(a.data + b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _node(a.data * b.data, (a, b), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        # lift 1-d operands to matrices so one rule covers every case
        a2 = a.data.reshape(1, -1) if a.data.ndim == 1 else a.data
        b2 = b.data.reshape(-1, 1) if b.data.ndim == 1 else b.data
        g2 = np.asarray(g).reshape(a2.shape[0], b2.shape[1])
        if a.requires_grad:
            _accumulate(a, (g2 @ b2.T).reshape(a.shape))
        if b.requires_grad:
            _accumulate(b, (a2.T @ g2).reshape(b.shape))

    return _node(a.data @ b.data, (a, b), backward)


def sigmoid_array(x):
    # tanh form never overflows and matches the compiled kernel
    return 0.5 * np.tanh(0.5 * x) + 0.5


def sigmoid(a):
    a = as_tensor(a)
    s = sigmoid_array(a.data)

    def backward(g):
        _accumulate(a, g * s * (1.0 - s))

    return _node(s, (a,), backward)


def tanh(a):
    a = as_tensor(a)
    t = np.tanh(a.data)

    def backward(g):
        _accumulate(a, g * (1.0 - t * t))

    return _node(t, (a,), backward)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, bounds, axis=axis)):
            _accumulate(t, piece)

    return _node(data, tensors, backward)


def columns(a, start, stop):
    """``a[..., start:stop]``."""
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        full[..., start:stop] = g
        _accumulate(a, full)

    return _node(a.data[..., start:stop], (a,), backward)


def take_rows(table, idx):
    """Gather rows of a 2-d table; gradients scatter-add back."""
    table = as_tensor(table)
    idx = np.asarray(idx, dtype=np.intp)

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        _accumulate(table, full)

    return _node(table.data[idx], (table,), backward)


def dropout(x, rate, training=True, rng=None):
    """Inverted dropout.  Identity in eval mode or at ``rate == 0``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        rng = np.random.default_rng()
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor(mask))
