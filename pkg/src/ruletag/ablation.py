"""Variant x training-size x seed grid with per-cell reports and seed medians."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace
from statistics import median

from ruletag.corpus import SUBSAMPLE_PERCENTS, CorpusSplit, TagSet, subsample_indices, subsample_train
from ruletag.embeddings import EmbeddingStore
from ruletag.errors import ConfigError
from ruletag.metrics import EvalReport, evaluate, select_tail_labels
from ruletag.models import VARIANTS, ModelConfig, predict_all, train
from ruletag.rules import DictionarySet

log = logging.getLogger(__name__)


@dataclass
class Cell:
    variant: str
    percent: int
    seed: int
    report: EvalReport
    train_indices: list[int]
    history: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        r = self.report
        return {
            "variant": self.variant,
            "percent": self.percent,
            "seed": self.seed,
            "micro": r.micro_f1,
            "macro": r.macro_f1,
            "tail_micro": r.tail_micro_f1,
            "per_label": {r.tags.name(t): s.f1 for t, s in sorted(r.per_label.items())},
            "train_sentences": len(self.train_indices),
            "train_indices": self.train_indices,
        }


@dataclass
class AblationGrid:
    tags: TagSet
    variants: list[str]
    percents: list[int]
    seeds: list[int]
    tail_labels: set[int]
    cells: list[Cell]

    def cell(self, variant, percent, seed) -> Cell:
        for c in self.cells:
            if (c.variant, c.percent, c.seed) == (variant, percent, seed):
                return c
        raise KeyError((variant, percent, seed))

    def median(self, variant, percent, metric="micro") -> float | None:
        attr = {"micro": "micro_f1", "macro": "macro_f1", "tail_micro": "tail_micro_f1"}[metric]
        vals = [getattr(c.report, attr) for c in self.cells if c.variant == variant and c.percent == percent]
        vals = [v for v in vals if v is not None]
        return median(vals) if vals else None

    def jsonl(self) -> str:
        return "".join(json.dumps(c.to_json(), sort_keys=True) + "\n" for c in self.cells)

    def summary_csv(self, metrics=("micro", "macro")) -> str:
        """Rows per variant, one column per (percent, metric): seed medians."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variant"] + [f"{p}%_{m}" for p in self.percents for m in metrics])
        for v in self.variants:
            row = [v]
            for p in self.percents:
                for m in metrics:
                    val = self.median(v, p, m)
                    row.append("" if val is None else f"{val:.4f}")
            w.writerow(row)
        return buf.getvalue()


def run_ablation(split: CorpusSplit, tags: TagSet, dicts: DictionarySet, store: EmbeddingStore,
                 variants=VARIANTS, percents=SUBSAMPLE_PERCENTS, seeds=(0,),
                 base: ModelConfig = ModelConfig(), tail_budget: float = 0.05, tail_unit: str = "tokens",
                 keep_history: bool = False) -> AblationGrid:
    """Train and test every (variant, percent, seed) cell.

    Tail labels come from the full training split so every cell is scored
    against the same set.  The test split never changes.
    """
    variants, percents, seeds = list(variants), list(percents), list(seeds)
    if not variants or not percents or not seeds:
        raise ConfigError("variants, percents and seeds must be non-empty")
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant {v!r}")
    for p in percents:
        if p not in SUBSAMPLE_PERCENTS:
            raise ConfigError(f"percent must be one of {SUBSAMPLE_PERCENTS}")
    tail = select_tail_labels(split.train, tags, tail_budget, tail_unit)
    gold = [s.tags for s in split.test]
    cells = []
    for variant in variants:
        for percent in percents:
            for seed in seeds:
                idx = subsample_indices(len(split.train), percent, seed)
                sub = subsample_train(split, percent, seed)
                config = replace(base, variant=variant, seed=seed)
                model, history = train(config, sub, tags, dicts, store)
                report = evaluate(gold, predict_all(model, split.test), tags, tail)
                log.info("cell %s %d%% seed %d: micro %.4f macro %.4f", variant, percent, seed,
                         report.micro_f1, report.macro_f1)
                cells.append(Cell(variant, percent, seed, report, idx, history if keep_history else []))
    return AblationGrid(tags, variants, percents, seeds, tail, cells)
