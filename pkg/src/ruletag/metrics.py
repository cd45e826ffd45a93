"""Token-level micro/macro F1, tail-label selection and run comparison.

The ``O`` tag never counts as a positive: predicting ``O`` for a labelled
token is a false negative, predicting a label on an ``O`` token is a false
positive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ruletag.corpus import Sentence, TagSet
from ruletag.errors import DataError


@dataclass(frozen=True)
class LabelScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    tags: TagSet
    micro_f1: float
    macro_f1: float
    per_label: dict[int, LabelScore]
    counts: tuple[int, int, int]
    tail_labels: frozenset = field(default_factory=frozenset)
    tail_micro_f1: float | None = None

    def to_json(self) -> dict:
        tp, fp, fn = self.counts
        return {
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "tail_micro_f1": self.tail_micro_f1,
            "tail_labels": sorted(self.tags.name(t) for t in self.tail_labels),
            "counts": {"tp": tp, "fp": fp, "fn": fn},
            "per_label": {
                self.tags.name(t): {"precision": s.precision, "recall": s.recall, "f1": s.f1, "support": s.support}
                for t, s in sorted(self.per_label.items())
            },
        }


def f1_from_counts(tp, fp, fn) -> float:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


def _flat(seq):
    out = []
    for x in seq:
        if isinstance(x, (list, tuple, np.ndarray)):
            out.extend(int(v) for v in x)
        else:
            out.append(int(x))
    return out


def _count(gold, pred, other, n_tags):
    tp = np.zeros(n_tags, dtype=np.int64)
    fp = np.zeros(n_tags, dtype=np.int64)
    fn = np.zeros(n_tags, dtype=np.int64)
    g = np.asarray(gold, dtype=np.int64)
    p = np.asarray(pred, dtype=np.int64)
    hit = (g == p) & (g != other)
    np.add.at(tp, g[hit], 1)
    miss = ~hit
    np.add.at(fp, p[miss & (p != other)], 1)
    np.add.at(fn, g[miss & (g != other)], 1)
    return tp, fp, fn


def evaluate(gold, pred, tags: TagSet, tail_labels: Iterable[int] = ()) -> EvalReport:
    """Score aligned gold/pred tag ids (flat, or one list per sentence)."""
    gold, pred = _flat(gold), _flat(pred)
    if len(gold) != len(pred):
        raise DataError(f"gold has {len(gold)} tokens, prediction has {len(pred)}")
    other = tags.other_index
    tp, fp, fn = _count(gold, pred, other, len(tags))
    per_label = {}
    for t in tags.labels:
        p = tp[t] / (tp[t] + fp[t]) if tp[t] + fp[t] else 0.0
        r = tp[t] / (tp[t] + fn[t]) if tp[t] + fn[t] else 0.0
        per_label[t] = LabelScore(float(p), float(r), f1_from_counts(tp[t], fp[t], fn[t]), int(tp[t] + fn[t]))
    present = [s.f1 for s in per_label.values() if s.support > 0]
    counts = (int(tp.sum()), int(fp.sum()), int(fn.sum()))
    tail = frozenset(int(t) for t in tail_labels)
    tail_f1 = None
    if tail and any(x in tail for x in gold + pred):
        tail_f1 = tail_micro_f1(gold, pred, tail, tags)
    return EvalReport(
        tags=tags,
        micro_f1=f1_from_counts(*counts),
        macro_f1=float(np.mean(present)) if present else 0.0,
        per_label=per_label,
        counts=counts,
        tail_labels=tail,
        tail_micro_f1=tail_f1,
    )


def tail_micro_f1(gold, pred, tail, tags: TagSet) -> float:
    """Micro F1 with counts restricted to tokens whose gold or predicted tag is a tail label."""
    tail = set(tail)
    if not tail:
        raise DataError("tail label set is empty")
    gold, pred = _flat(gold), _flat(pred)
    if len(gold) != len(pred):
        raise DataError("gold and prediction differ in length")
    tp = fp = fn = 0
    touched = False
    for g, p in zip(gold, pred):
        if g not in tail and p not in tail:
            continue
        touched = True
        if g == p:
            tp += 1
            continue
        if p in tail:
            fp += 1
        if g in tail:
            fn += 1
    if not touched:
        raise DataError("no tail-label token in gold or prediction")
    return f1_from_counts(tp, fp, fn)


def label_counts(sentences: Sequence[Sentence], tags: TagSet, unit: str = "tokens") -> np.ndarray:
    if unit not in ("tokens", "sentences"):
        raise DataError(f"unit must be 'tokens' or 'sentences', got {unit!r}")
    counts = np.zeros(len(tags), dtype=np.int64)
    for s in sentences:
        for t in (s.tags if unit == "tokens" else set(s.tags)):
            counts[t] += 1
    return counts


def select_tail_from_counts(counts, other_index: int, budget: float = 0.05) -> set[int]:
    """Longest prefix of labels (ascending count, then id) whose total stays within the budget."""
    if not 0.0 < budget <= 1.0:
        raise DataError(f"budget must lie in (0, 1], got {budget}")
    labels = [t for t in range(len(counts)) if t != other_index]
    total = sum(int(counts[t]) for t in labels)
    if total == 0:
        raise DataError("no labelled tokens to select tail labels from")
    limit = Fraction(str(budget)) * total
    tail, cum = set(), 0
    for t in sorted(labels, key=lambda t: (int(counts[t]), t)):
        if cum + int(counts[t]) > limit:
            break
        cum += int(counts[t])
        tail.add(t)
    return tail


def select_tail_labels(train: Sequence[Sentence], tags: TagSet, budget: float = 0.05, unit: str = "tokens") -> set[int]:
    return select_tail_from_counts(label_counts(train, tags, unit), tags.other_index, budget)


def compare_runs(baseline: EvalReport, candidate: EvalReport):
    """Split non-other labels into (improved, equal, worse) by per-label F1."""
    if baseline.tags != candidate.tags:
        raise DataError("reports use different tag sets")
    improved, equal, worse = set(), set(), set()
    for t in baseline.tags.labels:
        a = baseline.per_label[t].f1
        b = candidate.per_label[t].f1
        (improved if b > a else worse if b < a else equal).add(t)
    return improved, equal, worse
