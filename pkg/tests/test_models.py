import json
from statistics import median

import numpy as np
import pytest

from oracles import check_tape_grads
from ruletag.autodiff import Adam
from ruletag.autodiff.losses import mixed_objective, softmax_cross_entropy
from ruletag.corpus import CorpusSplit, Sentence, TagSet, split_corpus
from ruletag.distill import project_teacher
from ruletag.embeddings import EmbeddingStore
from ruletag.errors import ConfigError, DataError
from ruletag.metrics import evaluate
from ruletag.models import (
    ModelConfig, Tagger, forward_a, forward_b, forward_c, load_checkpoint, predict_all, predict_d, save_checkpoint,
    train,
)
from ruletag.rules import RuleConfig, apply_rules, compile_dictionaries, rule_only_predict
from ruletag.synthetic import SyntheticConfig, generate_synthetic

SMALL = dict(dim=6, hidden=5, dropout=0.0)


@pytest.fixture(scope="module")
def synth():
    return generate_synthetic(SyntheticConfig(num_sentences=40, seed=1))


def build(variant, synth, seed=0, **kw):
    sents, tags, dicts = synth
    cfg = ModelConfig(variant=variant, **{**SMALL, **kw})
    words = [w for s in sents[:10] for w in s.words]
    return Tagger.create(cfg, tags, dicts, EmbeddingStore(cfg.dim, seed=seed), words, np.random.default_rng(seed))


@pytest.mark.parametrize("variant", "ABCD")
def test_distributions_shape_and_sum(variant, synth):
    m = build(variant, synth)
    for s in synth[0][:5]:
        p = m.distributions(s)
        assert p.shape == (len(s), len(m.tags))
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_variant_wrappers(synth):
    s = synth[0][0]
    a, b, c, d = (build(v, synth) for v in "ABCD")
    r = a.rule_vectors(s) if a.dicts else apply_rules(s, synth[2])
    assert forward_a(a, s).shape == forward_b(b, s, r).shape == forward_c(c, s, r).shape
    assert len(predict_d(d, s, r)) == len(s)
    with pytest.raises(ConfigError):
        forward_b(a, s, r)
    with pytest.raises(ConfigError):
        forward_c(b, s, r)
    with pytest.raises(ConfigError):
        predict_d(a, s)


def test_zero_output_projection_is_uniform(synth):
    m = build("A", synth)
    m.params["out.W"].data[:] = 0.0
    p = m.distributions(synth[0][0])
    np.testing.assert_allclose(p, 1.0 / len(m.tags), atol=1e-15)


def test_rule_vector_shape_checked(synth):
    m = build("B", synth)
    s = synth[0][0]
    with pytest.raises(DataError):
        m.distributions(s, np.ones((len(s) + 1, len(m.tags))))


def test_b_with_empty_dictionaries_matches_a_shapes(synth):
    sents, tags, _ = synth
    empty = compile_dictionaries({}, [], tags)
    b = build("B", (sents, tags, empty))
    a = build("A", synth)
    s = sents[0]
    r = b.rule_vectors(s)
    assert (r[:, tags.other_index] == 1).all()
    assert b.distributions(s).shape == a.distributions(s).shape
    assert b.params["enc.fwd.Wx"].shape[0] == a.params["enc.fwd.Wx"].shape[0] + len(tags)


def test_c_has_rule_encoder(synth):
    c = build("C", synth, rule_hidden=3)
    assert c.params["rule.fwd.Wh"].shape == (3, 12)
    assert c.params["out.W"].shape == (2 * 5 + 2 * 3, len(c.tags))
    with pytest.raises(ConfigError):
        ModelConfig(variant="C", rule_hidden=0)


@pytest.mark.parametrize("variant", "ABCD")
def test_gradcheck_full_model(variant, synth):
    m = build(variant, synth, seed=3)
    s = synth[0][2]
    r = m.rule_vectors(s)
    tensors = list(m.params.values())
    if variant == "D":
        # the teacher is a constant target, so hold it fixed under perturbation
        teacher = project_teacher(m.distributions(s, r), r, m.config.penalty)
        loss = lambda: mixed_objective(m.logits(s, r), teacher, s.tags, m.config.imitation)
        np.testing.assert_allclose(float(loss().data), float(m.loss(s, r, training=False).data), rtol=1e-12)
    else:
        loss = lambda: m.loss(s, r, training=False)
    assert check_tape_grads(loss, tensors) < 1e-4


def test_d_with_zero_imitation_equals_a_cross_entropy(synth):
    a = build("A", synth, seed=5)
    d = build("D", synth, seed=5, imitation=0.0)
    for s in synth[0][:5]:
        la = a.loss(s, training=False)
        ld = d.loss(s, training=False)
        assert float(la.data) == pytest.approx(float(ld.data), abs=1e-12)
        a.zero_grad(), d.zero_grad()
        la.backward(), ld.backward()
        for k in a.params:
            np.testing.assert_allclose(a.params[k].grad, d.params[k].grad, atol=1e-12)


def test_predict_d_teacher_and_student(synth):
    sents, tags, dicts = synth
    d = build("D", synth)
    d.params["out.W"].data[:] = 0.0
    s = sents[0]
    k = len(tags)
    r = np.zeros((len(s), k))
    r[:, 1] = 1
    assert predict_d(d, s, r) == [1] * len(s)
    ones = np.ones((len(s), k))
    student = build("D", synth, inference_source="student")
    assert predict_d(student, s, ones) == list(student.distributions(s).argmax(axis=1))
    assert predict_d(student, s, r) == list(student.distributions(s).argmax(axis=1))
    rng = np.random.default_rng(0)
    student.params["out.b"].data = rng.normal(size=k)
    teacher = build("D", synth)
    teacher.params = student.params
    assert predict_d(teacher, s, ones) == predict_d(student, s, ones)


def test_overfit_one_sentence(synth):
    s = synth[0][0]
    m = build("A", synth, hidden=16, dim=8)
    opt = Adam(m.config.optimizer())
    rng = np.random.default_rng(0)
    for _ in range(300):
        m.zero_grad()
        m.loss(s, training=True, rng=rng).backward()
        opt.step(m.params, m.grads())
    assert m.predict(s) == s.tags


def test_unknown_words_at_inference(synth):
    m = build("A", synth)
    p = m.distributions(["never", "seen", "words"])
    assert p.shape == (3, len(m.tags))


def test_train_errors(synth):
    sents, tags, dicts = synth
    store = EmbeddingStore(6)
    with pytest.raises(DataError):
        train(ModelConfig(**SMALL), CorpusSplit([], sents, []), tags, None, store)
    with pytest.raises(ConfigError):
        train(ModelConfig(variant="B", **SMALL), CorpusSplit(sents, [], []), tags, None, store)
    with pytest.raises(ConfigError):
        train(ModelConfig(**SMALL), CorpusSplit(sents, [], []), tags, None, store, epochs=0)


def test_train_deterministic_and_selects_best(synth):
    sents, tags, dicts = synth
    split = split_corpus(sents, (0.7, 0.1, 0.2), 0)
    runs = []
    for _ in range(2):
        model, log = train(ModelConfig(variant="D", epochs=3, **{**SMALL, "dropout": 0.5}), split, tags, dicts,
                           EmbeddingStore(6))
        runs.append((json.dumps(log), model.snapshot()))
    assert runs[0][0] == runs[1][0]
    for k in runs[0][1]:
        assert np.array_equal(runs[0][1][k], runs[1][1][k])
    log = json.loads(runs[0][0])
    assert sum(e["selected"] for e in log) == 1
    best = max(e["val_micro_f1"] for e in log)
    assert next(e for e in log if e["selected"])["val_micro_f1"] == best
    assert all(e["imitation"] == 0.4 for e in log)


def test_config_from_dict():
    cfg = ModelConfig.from_dict({"variant": "D", "C": 2.0, "pi": 0.1})
    assert cfg.penalty == 2.0 and cfg.imitation == 0.1
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"learning_rate": 1})
    for kw in ({"variant": "E"}, {"dropout": 1.0}, {"hidden": 0}, {"imitation": 2}, {"window": -1}):
        with pytest.raises(ConfigError):
            ModelConfig(**kw)


def test_checkpoint_round_trip(tmp_path, synth):
    m = build("C", synth)
    path = tmp_path / "ck.json"
    save_checkpoint(m, path, {"note": 1})
    back = load_checkpoint(path)
    assert back.config == m.config and back.tags == m.tags and back.dicts == m.dicts
    for s in synth[0][:3]:
        assert np.array_equal(back.distributions(s), m.distributions(s))
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "bad.json")


def test_a_beats_rule_only_with_context_dependent_tags():
    # decoy sentences list trigger words that are tagged O after a cue word
    sents, tags, dicts = generate_synthetic(SyntheticConfig(num_sentences=200, decoy_fraction=0.3, seed=0))
    split = split_corpus(sents, (0.7, 0.1, 0.2), 0)
    model, log = train(ModelConfig(variant="A"), split, tags, None, EmbeddingStore(50))
    gold = [s.tags for s in split.val]
    rule_only = [rule_only_predict(apply_rules(s, dicts, RuleConfig())) for s in split.val]
    learned = evaluate(gold, predict_all(model, split.val), tags).micro_f1
    assert learned > evaluate(gold, rule_only, tags).micro_f1
    assert learned == max(e["val_micro_f1"] for e in log)


@pytest.mark.slow
def test_b_at_least_a_on_fifty_sentences():
    sents, tags, dicts = generate_synthetic(SyntheticConfig(num_sentences=200, seed=0))
    split = split_corpus(sents, (0.7, 0.1, 0.2), 0)
    split = CorpusSplit(split.train[:50], split.val, split.test)
    scores = {"A": [], "B": []}
    for seed in range(5):
        for v in scores:
            model, _ = train(ModelConfig(variant=v, seed=seed), split, tags, dicts, EmbeddingStore(50, seed=seed))
            scores[v].append(evaluate([s.tags for s in split.test], predict_all(model, split.test), tags).micro_f1)
    assert median(scores["B"]) >= median(scores["A"])


def test_d_trains_thirty_epochs_without_nan(synth):
    sents, tags, dicts = synth
    split = split_corpus(sents, (0.7, 0.1, 0.2), 2)
    model, log = train(ModelConfig(variant="D", dim=16, hidden=16, epochs=30), split, tags, dicts, EmbeddingStore(16))
    assert len(log) == 30
    assert all(np.isfinite(e["loss"]) for e in log)
    for p in model.params.values():
        assert np.isfinite(p.data).all()


def test_softmax_ce_matches_model_loss(synth):
    m = build("A", synth)
    s = synth[0][0]
    z = m.logits(s)
    assert float(m.loss(s, training=False).data) == float(softmax_cross_entropy(z, s.tags)[0].data)


def test_sentence_object_and_words_agree(synth):
    m = build("A", synth)
    s = synth[0][3]
    np.testing.assert_array_equal(m.distributions(s), m.distributions(Sentence.build(9, s.words, s.tags)))


def test_tagset_mismatch_rejected(synth):
    sents, tags, dicts = synth
    small = TagSet.from_names(["EVT0"])
    with pytest.raises(DataError):
        train(ModelConfig(**SMALL), CorpusSplit(sents, [], []), small, None, EmbeddingStore(6))
