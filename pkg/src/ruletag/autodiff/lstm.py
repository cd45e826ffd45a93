"""LSTM cell, fused LSTM sequence op and the bidirectional encoder.

Gate layout along the 4h axis: input, forget, output, candidate.
Parameters per direction: ``Wx`` (d, 4h), ``Wh`` (h, 4h), ``b`` (4h,).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ruletag.autodiff import kernels
from ruletag.autodiff.tensor import (
    Tensor, _accumulate, _node, add, as_tensor, columns, concat, matmul, mul, sigmoid, take_rows, tanh,
)


@dataclass
class LSTMParams:
    Wx: Tensor
    Wh: Tensor
    b: Tensor

    @property
    def input_size(self):
        return self.Wx.shape[0]

    @property
    def hidden_size(self):
        return self.Wh.shape[0]

    @classmethod
    def init(cls, input_size, hidden_size, rng, prefix=""):
        if input_size <= 0 or hidden_size <= 0:
            raise ValueError("LSTM sizes must be positive")
        bound = 1.0 / np.sqrt(hidden_size)
        b = np.zeros(4 * hidden_size)
        b[hidden_size:2 * hidden_size] = 1.0
        return cls(
            Tensor(rng.uniform(-bound, bound, (input_size, 4 * hidden_size)), True, prefix + "Wx"),
            Tensor(rng.uniform(-bound, bound, (hidden_size, 4 * hidden_size)), True, prefix + "Wh"),
            Tensor(b, True, prefix + "b"),
        )

    def tensors(self):
        return [self.Wx, self.Wh, self.b]

    def check(self):
        d, h = self.input_size, self.hidden_size
        if self.Wx.shape != (d, 4 * h) or self.Wh.shape != (h, 4 * h) or self.b.shape != (4 * h,):
            raise ValueError(f"inconsistent LSTM parameter shapes {self.Wx.shape}, {self.Wh.shape}, {self.b.shape}")


@dataclass
class EncoderState:
    forward_hidden: Tensor
    backward_hidden: Tensor

    def concat(self):
        return concat([self.forward_hidden, self.backward_hidden], axis=1)


def lstm_cell(x, h_prev, c_prev, params: LSTMParams):
    """One step of the gated cell built from primitive tape ops."""
    params.check()
    x, h_prev, c_prev = as_tensor(x), as_tensor(h_prev), as_tensor(c_prev)
    h = params.hidden_size
    if x.shape != (params.input_size,) or h_prev.shape != (h,) or c_prev.shape != (h,):
        raise ValueError(f"lstm_cell dimension mismatch: x{x.shape} h{h_prev.shape} c{c_prev.shape}")
    z = add(add(matmul(x, params.Wx), matmul(h_prev, params.Wh)), params.b)
    i = sigmoid(columns(z, 0, h))
    f = sigmoid(columns(z, h, 2 * h))
    o = sigmoid(columns(z, 2 * h, 3 * h))
    g = tanh(columns(z, 3 * h, 4 * h))
    c = add(mul(f, c_prev), mul(i, g))
    return mul(o, tanh(c)), c


def lstm_sequence(xs, params: LSTMParams, reverse=False, impl=None):
    """Run the cell over the rows of ``xs`` (n, d) from zero state.

    Returns the hidden states (n, h) in input order.  The recurrence runs in
    the selected kernel; the input and recurrent weight gradients are formed
    with whole-sequence matrix products.
    """
    params.check()
    xs = as_tensor(xs)
    if xs.data.ndim != 2 or xs.shape[0] == 0:
        raise ValueError("lstm_sequence needs a non-empty (n, d) input")
    if xs.shape[1] != params.input_size:
        raise ValueError(f"input width {xs.shape[1]} != LSTM input size {params.input_size}")
    Wx, Wh, b = params.Wx, params.Wh, params.b
    x = xs.data[::-1] if reverse else xs.data
    zx = x @ Wx.data + b.data
    hs, cs, acts = kernels.recurrence_forward(zx, Wh.data, impl)

    def backward(g):
        g = g[::-1] if reverse else g
        dz = kernels.recurrence_backward(g, acts, cs, Wh.data, impl)
        if xs.requires_grad:
            dx = dz @ Wx.data.T
            _accumulate(xs, dx[::-1] if reverse else dx)
        _accumulate(Wx, x.T @ dz)
        _accumulate(Wh, hs[:-1].T @ dz[1:])
        _accumulate(b, dz.sum(axis=0))

    return _node(hs[::-1].copy() if reverse else hs, (xs, Wx, Wh, b), backward)


def lstm_sequence_stepwise(xs, params: LSTMParams, reverse=False):
    """Same as :func:`lstm_sequence`, unrolled through :func:`lstm_cell`."""
    xs = as_tensor(xs)
    n = xs.shape[0]
    h = Tensor(np.zeros(params.hidden_size))
    c = Tensor(np.zeros(params.hidden_size))
    outs = [None] * n
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        h, c = lstm_cell(take_rows(xs, t), h, c, params)
        outs[t] = h
    return concat([_as_row(o) for o in outs], axis=0)


def _as_row(v):
    def backward(g):
        _accumulate(v, g.reshape(v.shape))
    return _node(v.data.reshape(1, -1), (v,), backward)


def bi_encode(inputs, fwd: LSTMParams, bwd: LSTMParams, impl=None) -> EncoderState:
    """Left-to-right and right-to-left passes over the same (n, d) inputs."""
    inputs = as_tensor(inputs)
    if inputs.data.ndim != 2 or inputs.shape[0] == 0:
        raise ValueError("bi_encode needs a non-empty sequence")
    return EncoderState(lstm_sequence(inputs, fwd, False, impl), lstm_sequence(inputs, bwd, True, impl))
