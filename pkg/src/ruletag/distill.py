"""Rule projection of the student distribution and the mixed training loss.

The teacher keeps the student's mass on rule-licensed tags and damps every
other tag by ``exp(-C)``, then renormalises.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ruletag.autodiff.losses import cross_entropy, kl_divergence
from ruletag.errors import ConfigError, DataError

INFERENCE_SOURCES = ("teacher", "student")


@dataclass(frozen=True)
class DistillationConfig:
    penalty: float = 1.0
    imitation: float = 0.4
    inference_source: str = "teacher"
    schedule: str = "constant"
    anneal_base: float = 0.95

    def __post_init__(self):
        if self.penalty < 0:
            raise ConfigError("penalty C must be >= 0")
        if not 0.0 <= self.imitation <= 1.0:
            raise ConfigError("imitation must lie in [0, 1]")
        if self.inference_source not in INFERENCE_SOURCES:
            raise ConfigError(f"inference_source must be one of {INFERENCE_SOURCES}")
        if self.schedule not in ("constant", "anneal"):
            raise ConfigError("schedule must be 'constant' or 'anneal'")

    def imitation_at(self, epoch: int) -> float:
        """Imitation weight for a 1-based epoch.  ``anneal`` ramps toward the cap."""
        if self.schedule == "constant":
            return self.imitation
        return min(self.imitation, 1.0 - self.anneal_base ** epoch)


def project_teacher(student, rule, penalty: float = 1.0) -> np.ndarray:
    """Teacher rows proportional to ``student * exp(-penalty * (1 - rule))``.

    Works on a single distribution or on (n, k) rows.
    """
    p = np.asarray(student, dtype=np.float64)
    r = np.asarray(rule, dtype=np.float64)
    if p.shape != r.shape:
        raise DataError(f"student {p.shape} and rule vector {r.shape} differ in shape")
    if not np.all(r.reshape(-1, r.shape[-1]).any(axis=1)):
        raise DataError("rule vector has no bit set")
    # work in log space so tiny student probabilities keep their exact ratios
    with np.errstate(divide="ignore"):
        logq = np.log(p) - penalty * (1.0 - r)
    logq -= logq.max(axis=-1, keepdims=True)
    q = np.exp(logq)
    return q / q.sum(axis=-1, keepdims=True)


def distill_loss(student, teacher, gold, config: DistillationConfig = DistillationConfig()) -> float:
    """Mean over tokens of (1-pi) CE(gold, student) + pi KL(teacher || student)."""
    student = np.asarray(student, dtype=np.float64)
    teacher = np.asarray(teacher, dtype=np.float64)
    gold = list(gold)
    if not (len(student) == len(teacher) == len(gold)):
        raise DataError("student, teacher and gold must have the same length")
    if not gold:
        raise DataError("empty sequence")
    pi = config.imitation
    total = 0.0
    for s, t, g in zip(student, teacher, gold):
        total += (1.0 - pi) * cross_entropy(s, g) + pi * kl_divergence(t, s)
    return total / len(gold)
