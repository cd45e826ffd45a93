import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import count_prf
from ruletag.corpus import Sentence, TagSet
from ruletag.errors import DataError
from ruletag.metrics import (
    compare_runs, evaluate, f1_from_counts, label_counts, select_tail_from_counts, select_tail_labels, tail_micro_f1,
)

TAGS = TagSet.from_names(["A", "B", "C", "D", "E"])
O = TAGS.other_index


def test_perfect():
    gold = [0, 1, O, 2, O]
    r = evaluate(gold, gold, TAGS)
    assert r.micro_f1 == 1.0 and r.macro_f1 == 1.0


def test_all_other_prediction():
    r = evaluate([0, 1, O], [O, O, O], TAGS)
    assert r.micro_f1 == 0.0 and r.counts == (0, 0, 2)


def test_worked_example():
    # 3 gold labels, 4 predicted labels, 2 correct
    gold = [0, 1, 2, O, O, O]
    pred = [0, 1, O, 3, 4, O]
    r = evaluate(gold, pred, TAGS)
    assert r.counts == (2, 2, 1)
    assert abs(r.micro_f1 - 0.5714) < 1e-4
    assert abs(r.micro_f1 - 4 / 7) < 1e-15


def test_nested_input_and_length_check():
    r = evaluate([[0, O], [1]], [[0, O], [1]], TAGS)
    assert r.micro_f1 == 1.0
    with pytest.raises(DataError):
        evaluate([0, 1], [0], TAGS)


def test_macro_over_present_labels():
    r = evaluate([0, 0, 1], [0, 0, O], TAGS)
    assert r.per_label[0].f1 == 1.0 and r.per_label[1].f1 == 0.0
    assert r.macro_f1 == 0.5
    assert sum(s.support for s in r.per_label.values()) == 3


def test_to_json_names_labels():
    doc = evaluate([0, 1], [0, 1], TAGS).to_json()
    assert set(doc["per_label"]) == {"A", "B", "C", "D", "E"}


def test_matches_counting_oracle(rng):
    for _ in range(500):
        n = int(rng.integers(1, 40))
        gold = rng.integers(0, len(TAGS), n).tolist()
        pred = rng.integers(0, len(TAGS), n).tolist()
        tp, fp, fn, f1 = count_prf(gold, pred, O)
        r = evaluate(gold, pred, TAGS)
        assert r.counts == (tp, fp, fn)
        assert r.micro_f1 == f1
        assert r.micro_f1 == f1_from_counts(*r.counts)


def test_macro_permutation_invariant(rng):
    for _ in range(50):
        gold = rng.integers(0, len(TAGS), 30)
        pred = rng.integers(0, len(TAGS), 30)
        perm = np.concatenate([rng.permutation(O), [O]])
        a = evaluate(gold.tolist(), pred.tolist(), TAGS)
        b = evaluate(perm[gold].tolist(), perm[pred].tolist(), TAGS)
        assert abs(a.macro_f1 - b.macro_f1) < 1e-12
        assert a.micro_f1 == b.micro_f1


def test_tail_hand_trace():
    assert select_tail_from_counts([50, 30, 12, 5, 3, 900], O, 0.05) == {4}


def test_tail_full_and_empty():
    assert select_tail_from_counts([50, 30, 12, 5, 3, 0], O, 1.0) == {0, 1, 2, 3, 4}
    assert select_tail_from_counts([10] * 5 + [0], O, 0.05) == set()


def test_tail_errors():
    with pytest.raises(DataError):
        select_tail_from_counts([0, 0, 0, 0, 0, 7], O)
    with pytest.raises(DataError):
        select_tail_from_counts([1] * 6, O, 0.0)


def test_tail_tie_break_by_id():
    # two labels of count 2 under a limit of 3; only the lower id fits
    assert select_tail_from_counts([2, 2, 10, 10, 36, 0], O, 0.05) == {0}
    assert select_tail_from_counts([10, 2, 2, 10, 36, 0], O, 0.05) == {1}


@given(st.lists(st.integers(0, 200), min_size=2, max_size=9), st.sampled_from([0.01, 0.05, 0.1, 0.3, 0.5]))
def test_tail_prefix_rule(counts, budget):
    counts = counts + [0]
    other = len(counts) - 1
    if sum(counts[:other]) == 0:
        return
    tail = select_tail_from_counts(counts, other, budget)
    total = sum(counts[:other])
    order = sorted(range(other), key=lambda t: (counts[t], t))
    mass = sum(counts[t] for t in tail)
    assert mass <= budget * total + 1e-9
    assert set(order[:len(tail)]) == tail
    if len(tail) < other:
        nxt = order[len(tail)]
        assert mass + counts[nxt] > budget * total - 1e-9


def test_select_tail_labels_from_sentences():
    train = [Sentence.build(0, ["x"] * 5, [0, 0, 0, 1, O]), Sentence.build(0, ["x"] * 2, [0, 0])]
    counts = label_counts(train, TAGS)
    assert counts[0] == 5 and counts[1] == 1
    assert label_counts(train, TAGS, "sentences")[0] == 2
    # unseen labels have count 0 and sit at the front of the ascending order
    assert select_tail_labels(train, TAGS, 0.2) == {1, 2, 3, 4}
    assert select_tail_labels(train, TAGS, 0.1) == {2, 3, 4}
    with pytest.raises(DataError):
        label_counts(train, TAGS, "docs")


def test_tail_micro():
    assert tail_micro_f1([3, 4, O], [3, 4, O], {3, 4}, TAGS) == 1.0
    # 2 TP, 1 FP, 1 FN
    gold = [3, 3, O, 4, 0]
    pred = [3, 3, 4, O, 0]
    assert abs(tail_micro_f1(gold, pred, {3, 4}, TAGS) - 2 / 3) < 1e-12
    with pytest.raises(DataError):
        tail_micro_f1([0, O], [0, O], {3}, TAGS)
    with pytest.raises(DataError):
        tail_micro_f1([0], [0], set(), TAGS)


def test_evaluate_records_tail():
    r = evaluate([3, 0], [3, 0], TAGS, {3})
    assert r.tail_micro_f1 == 1.0 and r.tail_labels == {3}
    assert evaluate([0], [0], TAGS, {3}).tail_micro_f1 is None


def test_compare_runs():
    base = evaluate([0, 1, 2], [0, O, 2], TAGS)
    assert compare_runs(base, base) == (set(), set(TAGS.labels), set())
    better = evaluate([0, 1, 2], [0, 1, 2], TAGS)
    assert compare_runs(base, better)[0] == {1}
    with pytest.raises(DataError):
        compare_runs(base, evaluate([0], [0], TagSet.from_names(["A"])))


def test_compare_runs_partition(rng):
    for _ in range(100):
        g = rng.integers(0, len(TAGS), 20).tolist()
        a = evaluate(g, rng.integers(0, len(TAGS), 20).tolist(), TAGS)
        b = evaluate(g, rng.integers(0, len(TAGS), 20).tolist(), TAGS)
        imp, eq, worse = compare_runs(a, b)
        assert len(imp) + len(eq) + len(worse) == len(TAGS.labels)
        assert imp | eq | worse == set(TAGS.labels)
