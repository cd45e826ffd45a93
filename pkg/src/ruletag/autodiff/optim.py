"""Adam with optional global-norm gradient clipping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ruletag.errors import NumericError


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float | None = 5.0


def clip_by_global_norm(grads, max_norm):
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm is not None and total > max_norm:
        scale = max_norm / total
        grads = {k: g * scale for k, g in grads.items()}
    return grads, total


class Adam:
    def __init__(self, config: OptimizerConfig = OptimizerConfig()):
        self.config = config
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads):
        """Update ``params`` (name -> Tensor) in place from ``grads`` (name -> array)."""
        missing = [k for k in params if k not in grads]
        if missing:
            raise KeyError(f"no gradient for parameters {missing}")
        cfg = self.config
        grads, _ = clip_by_global_norm({k: grads[k] for k in params}, cfg.clip_norm)
        self.t += 1
        c1 = 1.0 - cfg.beta1 ** self.t
        c2 = 1.0 - cfg.beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p.data
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p.data -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
            if not np.isfinite(p.data).all():
                raise NumericError(f"parameter {name!r} became non-finite")
        return params


def step(params, grads, optimizer: Adam):
    return optimizer.step(params, grads)
