"""BiLSTM taggers with and without dictionary rules.

Variants
--------
A
    embeddings -> BiLSTM -> per-token softmax.
B
    [embedding; rule vector] with dropout -> BiLSTM -> softmax.
C
    one BiLSTM over embeddings, a second over rule vectors, hidden states
    concatenated -> softmax.
D
    the A network trained against a mix of gold cross-entropy and KL to the
    rule-projected teacher; inference uses the teacher by default.
"""
from __future__ import annotations

import copy
import json
import logging
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from ruletag.autodiff import Adam, LSTMParams, OptimizerConfig, Tensor, bi_encode, concat, dropout, take_rows
from ruletag.autodiff.losses import mixed_objective, softmax, softmax_cross_entropy
from ruletag.corpus import CorpusSplit, Sentence, TagSet
from ruletag.distill import DistillationConfig, project_teacher
from ruletag.embeddings import EmbeddingStore
from ruletag.errors import ConfigError, DataError, NumericError
from ruletag.metrics import evaluate
from ruletag.rules import DictionarySet, RuleConfig, apply_rules, compile_dictionaries

log = logging.getLogger(__name__)

VARIANTS = ("A", "B", "C", "D")
CHECKPOINT_FORMAT = "ruletag-checkpoint/1"


@dataclass(frozen=True)
class ModelConfig:
    """Flat training configuration; mirrors the training-config JSON."""

    variant: str = "A"
    dim: int = 50
    hidden: int = 100
    rule_hidden: int | None = None
    dropout: float = 0.5
    lr: float = 1e-3
    clip_norm: float | None = 5.0
    epochs: int = 30
    seed: int = 0
    fine_tune: bool = True
    oov_policy: str = "random_normal"
    window: int = 2
    match_mode: str = "exact"
    similarity_threshold: float = 0.7
    case_fold: bool = True
    negative_scope: str = "sentence"
    penalty: float = 1.0
    imitation: float = 0.4
    inference_source: str = "teacher"
    imitation_schedule: str = "constant"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.dim <= 0 or self.hidden <= 0:
            raise ConfigError("dim and hidden must be positive")
        if self.rule_hidden is not None and self.rule_hidden <= 0:
            raise ConfigError("rule_hidden must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        self.rule_config()
        self.distillation()

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        aliases = {"C": "penalty", "pi": "imitation", "π": "imitation"}
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in doc.items():
            key = aliases.get(key, key)
            if key not in known:
                raise ConfigError(f"unknown config field {key!r}")
            kwargs[key] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return asdict(self)

    def rule_config(self) -> RuleConfig:
        return RuleConfig(self.window, self.match_mode, self.similarity_threshold, self.case_fold, self.negative_scope)

    def distillation(self) -> DistillationConfig:
        return DistillationConfig(self.penalty, self.imitation, self.inference_source, self.imitation_schedule)

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(lr=self.lr, clip_norm=self.clip_norm)

    @property
    def uses_rules(self) -> bool:
        return self.variant in ("B", "C", "D")


class Tagger:
    """Parameters plus everything needed to turn words into tag ids."""

    def __init__(self, config: ModelConfig, tags: TagSet, dicts: DictionarySet | None,
                 store: EmbeddingStore, vocab: list[str], params: dict[str, Tensor]):
        if config.uses_rules and dicts is None:
            raise ConfigError(f"variant {config.variant} needs dictionaries")
        self.config = config
        self.tags = tags
        self.dicts = dicts
        self.store = store
        self.vocab = list(vocab)
        self.word_index = {w: i for i, w in enumerate(self.vocab)}
        self.params = params
        self.rule_config = config.rule_config()
        self.distill_config = config.distillation()

    # construction -----------------------------------------------------------

    @classmethod
    def create(cls, config: ModelConfig, tags: TagSet, dicts, store: EmbeddingStore, train_words, rng):
        """Fresh parameters; ``train_words`` seeds the fine-tunable embedding rows."""
        k = len(tags)
        d = store.dim
        h = config.hidden
        params: dict[str, Tensor] = {}
        vocab = sorted(set(train_words)) if config.fine_tune and store.trainable else []
        if vocab:
            params["embedding"] = Tensor(store.matrix(vocab).copy(), True, "embedding")
        in_dim = d + k if config.variant == "B" else d
        enc_f = LSTMParams.init(in_dim, h, rng, "enc.fwd.")
        enc_b = LSTMParams.init(in_dim, h, rng, "enc.bwd.")
        for p in enc_f.tensors() + enc_b.tensors():
            params[p.name] = p
        out_in = 2 * h
        if config.variant == "C":
            h2 = config.rule_hidden or h
            rf = LSTMParams.init(k, h2, rng, "rule.fwd.")
            rb = LSTMParams.init(k, h2, rng, "rule.bwd.")
            for p in rf.tensors() + rb.tensors():
                params[p.name] = p
            out_in += 2 * h2
        bound = np.sqrt(6.0 / (out_in + k))
        params["out.W"] = Tensor(rng.uniform(-bound, bound, (out_in, k)), True, "out.W")
        params["out.b"] = Tensor(np.zeros(k), True, "out.b")
        return cls(config, tags, dicts, store, vocab, params)

    def _lstm(self, prefix):
        p = self.params
        return LSTMParams(p[prefix + "Wx"], p[prefix + "Wh"], p[prefix + "b"])

    # forward ----------------------------------------------------------------

    def rule_vectors(self, sentence) -> np.ndarray:
        return apply_rules(sentence, self.dicts, self.rule_config, self.store)

    def embed(self, words) -> Tensor:
        table = self.params.get("embedding")
        if table is None:
            return Tensor(self.store.matrix(words))
        idx, extra = [], []
        for w in words:
            i = self.word_index.get(w)
            if i is None:
                i = len(self.vocab) + len(extra)
                extra.append(self.store.lookup(w))
            idx.append(i)
        if extra:
            table = concat([table, Tensor(np.array(extra))], axis=0)
        return take_rows(table, idx)

    def logits(self, words, rules=None, training=False, rng=None) -> Tensor:
        words = words.words if isinstance(words, Sentence) else list(words)
        if not words:
            raise DataError("empty sentence")
        variant = self.config.variant
        k = len(self.tags)
        if variant in ("B", "C"):
            if rules is None:
                raise DataError(f"variant {variant} needs rule vectors")
            rules = np.asarray(rules, dtype=np.float64)
            if rules.shape != (len(words), k):
                raise DataError(f"rule vectors have shape {rules.shape}, expected {(len(words), k)}")
        x = self.embed(words)
        if variant == "B":
            x = concat([x, Tensor(rules)], axis=1)
        x = dropout(x, self.config.dropout, training, rng)
        hidden = [bi_encode(x, self._lstm("enc.fwd."), self._lstm("enc.bwd.")).concat()]
        if variant == "C":
            hidden.append(bi_encode(Tensor(rules), self._lstm("rule.fwd."), self._lstm("rule.bwd.")).concat())
        feats = concat(hidden, axis=1) if len(hidden) > 1 else hidden[0]
        return feats @ self.params["out.W"] + self.params["out.b"]

    def _rules_for(self, sentence, rules):
        if rules is None and self.config.uses_rules:
            rules = self.rule_vectors(sentence)
        return rules

    def distributions(self, sentence, rules=None) -> np.ndarray:
        """Student tag distributions, one row per token (eval mode)."""
        rules = self._rules_for(sentence, rules)
        return softmax(self.logits(sentence, rules).data)

    def teacher(self, sentence, rules=None) -> np.ndarray:
        rules = self.rule_vectors(sentence) if rules is None else rules
        return project_teacher(self.distributions(sentence, rules), rules, self.distill_config.penalty)

    def predict(self, sentence, rules=None) -> list[int]:
        rules = self._rules_for(sentence, rules)
        probs = self.distributions(sentence, rules)
        if self.config.variant == "D" and self.distill_config.inference_source == "teacher":
            probs = project_teacher(probs, rules, self.distill_config.penalty)
        return [int(i) for i in probs.argmax(axis=1)]

    def loss(self, sentence: Sentence, rules=None, training=True, rng=None, imitation=None) -> Tensor:
        rules = self._rules_for(sentence, rules)
        z = self.logits(sentence, rules, training, rng)
        gold = sentence.tags
        if self.config.variant != "D":
            return softmax_cross_entropy(z, gold)[0]
        teacher = project_teacher(softmax(z.data), rules, self.distill_config.penalty)
        pi = self.distill_config.imitation if imitation is None else imitation
        return mixed_objective(z, teacher, gold, pi)

    # bookkeeping ------------------------------------------------------------

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in self.params.items()}

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def restore(self, snap):
        for k, v in snap.items():
            self.params[k].data = v.copy()

    def check_finite(self):
        for k, p in self.params.items():
            if not np.isfinite(p.data).all():
                raise NumericError(f"parameter {k!r} is not finite")


def forward_a(model: Tagger, sentence) -> np.ndarray:
    if model.config.variant not in ("A", "D"):
        raise ConfigError("forward_a needs an A or D model")
    return model.distributions(sentence)


def forward_b(model: Tagger, sentence, rule_vectors) -> np.ndarray:
    if model.config.variant != "B":
        raise ConfigError("forward_b needs a B model")
    return model.distributions(sentence, rule_vectors)


def forward_c(model: Tagger, sentence, rule_vectors) -> np.ndarray:
    if model.config.variant != "C":
        raise ConfigError("forward_c needs a C model")
    return model.distributions(sentence, rule_vectors)


def predict_d(model: Tagger, sentence, rule_vectors=None) -> list[int]:
    if model.config.variant != "D":
        raise ConfigError("predict_d needs a D model")
    return model.predict(sentence, rule_vectors)


# training -------------------------------------------------------------------


def _check_sentences(sentences, tags):
    k = len(tags)
    for s in sentences:
        if any(not 0 <= t < k for t in s.tags):
            raise DataError("sentence tag id outside the tag set")


def predict_all(model: Tagger, sentences, rules=None) -> list[list[int]]:
    if rules is None:
        return [model.predict(s) for s in sentences]
    return [model.predict(s, r) for s, r in zip(sentences, rules)]


def train(config: ModelConfig, split: CorpusSplit, tags: TagSet, dicts: DictionarySet | None,
          store: EmbeddingStore, epochs: int | None = None, seed: int | None = None):
    """Sentence-at-a-time Adam training with best-validation selection.

    Returns ``(model, log)``; ``log`` has one dict per epoch.  The returned
    parameters are those of the epoch with the highest validation micro-F1
    (the earliest one on ties).  An empty validation split falls back to
    scoring the training split.
    """
    epochs = config.epochs if epochs is None else epochs
    seed = config.seed if seed is None else seed
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if not split.train:
        raise DataError("empty training split")
    if config.uses_rules and dicts is None:
        raise ConfigError(f"variant {config.variant} needs dictionaries")
    if dicts is None:
        dicts = compile_dictionaries({}, [], tags)
    _check_sentences(split.train + split.val, tags)
    if store.dim != config.dim and not store.table:
        store = replace(store, dim=config.dim, _oov={})

    rng = np.random.default_rng(seed)
    model = Tagger.create(config, tags, dicts, store, [w for s in split.train for w in s.words], rng)
    opt = Adam(config.optimizer())
    dcfg = config.distillation()

    needs_rules = config.uses_rules
    train_rules = [model.rule_vectors(s) for s in split.train] if needs_rules else [None] * len(split.train)
    val = split.val or split.train
    val_rules = [model.rule_vectors(s) for s in val] if needs_rules else None
    val_gold = [s.tags for s in val]

    history = []
    best_f1, best, best_epoch = -1.0, None, 0
    for epoch in range(1, epochs + 1):
        pi = dcfg.imitation_at(epoch)
        total = 0.0
        for i in rng.permutation(len(split.train)):
            model.zero_grad()
            loss = model.loss(split.train[i], train_rules[i], training=True, rng=rng, imitation=pi)
            loss.backward()
            opt.step(model.params, model.grads())
            total += float(loss.data)
        if not np.isfinite(total):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        model.check_finite()
        report = evaluate(val_gold, predict_all(model, val, val_rules), tags)
        entry = {
            "epoch": epoch,
            "loss": total / len(split.train),
            "val_micro_f1": report.micro_f1,
            "val_macro_f1": report.macro_f1,
            "train_sentences": len(split.train),
        }
        if config.variant == "D":
            entry["imitation"] = pi
        history.append(entry)
        log.debug("epoch %d loss %.4f val micro %.4f", epoch, entry["loss"], report.micro_f1)
        if report.micro_f1 > best_f1:
            best_f1, best, best_epoch = report.micro_f1, model.snapshot(), epoch
    model.restore(best)
    for entry in history:
        entry["selected"] = entry["epoch"] == best_epoch
    return model, history


# checkpoints ----------------------------------------------------------------


def save_checkpoint(model: Tagger, path, extra: dict | None = None):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": model.config.to_dict(),
        "tags": list(model.tags.names),
        "dictionaries": model.dicts.to_json(model.tags) if model.dicts is not None else None,
        "dictionaries_case_fold": model.dicts.case_fold if model.dicts is not None else True,
        "embedding": {
            "dim": model.store.dim,
            "oov_policy": model.store.oov_policy,
            "seed": model.store.seed,
        },
        "vocab": model.vocab,
        "params": {k: {"shape": list(p.shape), "data": p.data.ravel().tolist()} for k, p in model.params.items()},
    }
    if extra:
        doc["extra"] = extra
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path, store: EmbeddingStore | None = None) -> Tagger:
    """Rebuild a :class:`Tagger`.  Pass ``store`` to restore file vectors for unseen words."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a checkpoint ({exc})") from None
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: unsupported checkpoint format {doc.get('format')!r}")
    config = ModelConfig.from_dict(doc["config"])
    tags = TagSet.from_names(doc["tags"])
    dicts = None
    if doc.get("dictionaries") is not None:
        raw = doc["dictionaries"]
        dicts = compile_dictionaries(raw["synonyms"], raw["negative"], tags, doc.get("dictionaries_case_fold", True))
    emb = doc["embedding"]
    if store is None:
        store = EmbeddingStore(emb["dim"], {}, oov_policy=emb["oov_policy"], seed=emb["seed"])
    elif store.dim != emb["dim"]:
        raise DataError(f"embedding dim {store.dim} does not match checkpoint dim {emb['dim']}")
    params = {
        k: Tensor(np.array(v["data"], dtype=np.float64).reshape(v["shape"]), True, k)
        for k, v in doc["params"].items()
    }
    return Tagger(config, tags, dicts, store, doc["vocab"], params)


def clone(model: Tagger) -> Tagger:
    return copy.deepcopy(model)
