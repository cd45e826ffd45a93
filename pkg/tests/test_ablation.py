import csv
import io
import json

import pytest

from ruletag.ablation import run_ablation
from ruletag.corpus import split_corpus, subsample_indices
from ruletag.embeddings import EmbeddingStore
from ruletag.errors import ConfigError
from ruletag.models import ModelConfig
from ruletag.synthetic import SyntheticConfig, generate_synthetic

BASE = ModelConfig(dim=8, hidden=8, epochs=2)


@pytest.fixture(scope="module")
def data():
    sents, tags, dicts = generate_synthetic(SyntheticConfig(num_sentences=60, seed=5))
    return split_corpus(sents, (0.7, 0.1, 0.2), 0), tags, dicts


def test_single_cell(data):
    split, tags, dicts = data
    grid = run_ablation(split, tags, dicts, EmbeddingStore(8), ["A"], [100], [0], BASE)
    assert len(grid.cells) == 1
    cell = grid.cell("A", 100, 0)
    assert cell.train_indices == list(range(len(split.train)))
    assert grid.median("A", 100) == cell.report.micro_f1


def test_grid_size_and_layout(data):
    split, tags, dicts = data
    grid = run_ablation(split, tags, dicts, EmbeddingStore(8), ["A", "B"], [20, 40], [0, 1], BASE)
    assert len(grid.cells) == 2 * 2 * 2
    rows = list(csv.reader(io.StringIO(grid.summary_csv())))
    assert rows[0] == ["variant", "20%_micro", "20%_macro", "40%_micro", "40%_macro"]
    assert [r[0] for r in rows[1:]] == ["A", "B"]
    lines = grid.jsonl().splitlines()
    assert len(lines) == 8
    doc = json.loads(lines[0])
    assert {"variant", "percent", "seed", "micro", "macro", "tail_micro", "per_label"} <= set(doc)


def test_cells_train_on_the_subsample(data):
    split, tags, dicts = data
    grid = run_ablation(split, tags, dicts, EmbeddingStore(8), ["B"], [20], [3, 4], BASE, keep_history=True)
    for seed in (3, 4):
        cell = grid.cell("B", 20, seed)
        assert cell.train_indices == subsample_indices(len(split.train), 20, seed)
        assert all(e["train_sentences"] == len(cell.train_indices) for e in cell.history)


def test_deterministic(data):
    split, tags, dicts = data
    a = run_ablation(split, tags, dicts, EmbeddingStore(8), ["D"], [40], [0], BASE)
    b = run_ablation(split, tags, dicts, EmbeddingStore(8), ["D"], [40], [0], BASE)
    assert a.jsonl() == b.jsonl()


def test_tail_labels_from_full_train(data):
    split, tags, dicts = data
    grid = run_ablation(split, tags, dicts, EmbeddingStore(8), ["A"], [20], [0], BASE)
    assert all(c.report.tail_labels == frozenset(grid.tail_labels) for c in grid.cells)
    assert grid.tail_labels


@pytest.mark.parametrize("kw", [
    {"variants": []}, {"variants": ["E"]}, {"percents": [30]}, {"seeds": []},
])
def test_bad_grid(data, kw):
    split, tags, dicts = data
    args = {"variants": ["A"], "percents": [100], "seeds": [0], **kw}
    with pytest.raises(ConfigError):
        run_ablation(split, tags, dicts, EmbeddingStore(8), base=BASE, **args)
