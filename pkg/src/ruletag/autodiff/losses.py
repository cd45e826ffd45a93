"""Softmax, cross-entropy and KL terms.

``softmax_cross_entropy`` and ``mixed_objective`` are tape ops on logits;
``kl_divergence`` and ``cross_entropy`` work on plain probability vectors.
"""
from __future__ import annotations

import numpy as np

from ruletag.autodiff.tensor import Tensor, _accumulate, _node, as_tensor

KL_FLOOR = 1e-12


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _check_gold(gold, k):
    gold = np.atleast_1d(np.asarray(gold, dtype=np.intp))
    if k < 2:
        raise ValueError("need at least two classes")
    if (gold < 0).any() or (gold >= k).any():
        raise ValueError(f"gold id out of range for {k} classes")
    return gold


def softmax_cross_entropy(logits, gold):
    """Mean token cross-entropy of ``logits`` (k,) or (n, k).

    Returns ``(loss, probs)``: a scalar tape tensor and the softmax rows.
    """
    logits = as_tensor(logits)
    rows = logits.data.reshape(-1, logits.shape[-1])
    gold = _check_gold(gold, rows.shape[1])
    if len(gold) != len(rows):
        raise ValueError("one gold id per row required")
    logp = log_softmax(rows)
    probs = np.exp(logp)
    n = len(rows)
    loss = -logp[np.arange(n), gold].sum() / n

    def backward(g):
        d = probs.copy()
        d[np.arange(n), gold] -= 1.0
        _accumulate(logits, (g * d / n).reshape(logits.shape))

    out = _node(np.asarray(loss), (logits,), backward)
    return out, probs.reshape(logits.shape)


def cross_entropy(probs, gold) -> float:
    return float(-np.log(max(float(np.asarray(probs)[gold]), KL_FLOOR)))


def kl_divergence(p, q) -> float:
    """KL(p || q) with 0 ln 0 = 0 and q floored at 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    for name, v in (("p", p), ("q", q)):
        if abs(v.sum() - 1.0) > 1e-6 or (v < 0).any():
            raise ValueError(f"{name} is not a probability vector")
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / np.maximum(q[mask], KL_FLOOR))))


def mixed_objective(logits, targets, gold, imitation):
    """(1/n) sum of (1-pi) CE(gold, softmax z) + pi KL(targets || softmax z).

    ``targets`` are constant rows; no gradient flows into them.
    """
    logits = as_tensor(logits)
    n, k = logits.shape
    gold = _check_gold(gold, k)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (n, k) or len(gold) != n:
        raise ValueError("logits, targets and gold must agree in length")
    logp = log_softmax(logits.data)
    probs = np.exp(logp)
    ce = -logp[np.arange(n), gold]
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(targets > 0, targets * np.log(targets), 0.0).sum(axis=1)
    kl = ent - (targets * logp).sum(axis=1)
    loss = ((1.0 - imitation) * ce + imitation * kl).sum() / n

    def backward(g):
        onehot = np.zeros((n, k))
        onehot[np.arange(n), gold] = 1.0
        d = (1.0 - imitation) * (probs - onehot) + imitation * (probs - targets)
        _accumulate(logits, g * d / n)

    return _node(np.asarray(loss), (logits,), backward)
