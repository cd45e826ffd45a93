"""Deterministic synthetic event corpora with matching dictionaries.

Each sentence is filler words plus at most one planted trigger.  Three kinds
of sentence are produced:

* event: the trigger carries its tag, everything else is ``O``;
* negated: a negative-dictionary word appears and every token is ``O``;
* decoy: a cue word directly precedes a trigger word, which is then ``O``.
  Dictionaries still list the word, so decoys are the only case where the
  rules alone get the answer wrong.

Event counts per tag follow ``(rank + 1) ** -skew`` by largest-remainder
apportionment, so the label histogram never increases with rank.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from ruletag.corpus import OTHER, Sentence, TagSet, Token
from ruletag.errors import ConfigError
from ruletag.rules import DictionarySet, compile_dictionaries


@dataclass(frozen=True)
class SyntheticConfig:
    num_tags: int = 8
    num_sentences: int = 200
    vocab_size: int = 200
    skew: float = 1.5
    negated_fraction: float = 0.1
    seed: int = 0
    decoy_fraction: float = 0.0
    words_per_tag: int = 3
    negative_words: int = 3
    cue_words: int = 2
    min_len: int = 5
    max_len: int = 12
    sentences_per_doc: int = 5

    def __post_init__(self):
        if self.num_tags < 2:
            raise ConfigError("num_tags must be >= 2")
        if self.num_sentences < 10:
            raise ConfigError("num_sentences must be >= 10")
        if self.vocab_size < 1 or self.words_per_tag < 1:
            raise ConfigError("vocab_size and words_per_tag must be positive")
        if self.negated_fraction < 0 or self.decoy_fraction < 0 or self.negated_fraction + self.decoy_fraction > 1:
            raise ConfigError("negated_fraction and decoy_fraction must be >= 0 and sum to at most 1")
        if self.negated_fraction > 0 and self.negative_words < 1:
            raise ConfigError("negated sentences need at least one negative word")
        if self.decoy_fraction > 0 and self.cue_words < 1:
            raise ConfigError("decoy sentences need at least one cue word")
        if not 2 <= self.min_len <= self.max_len:
            raise ConfigError("need 2 <= min_len <= max_len")
        if self.sentences_per_doc < 1:
            raise ConfigError("sentences_per_doc must be positive")

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown synthetic config fields {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"synthetic config is not valid JSON: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


def tag_names(num_tags: int) -> list[str]:
    return [f"EVT{r}" for r in range(num_tags)]


def trigger_word(rank: int, j: int) -> str:
    return f"trig{rank}x{j}"


def apportion(total: int, weights) -> list[int]:
    weights = np.asarray(weights, dtype=np.float64)
    quotas = total * weights / weights.sum()
    counts = np.floor(quotas).astype(int)
    rest = total - counts.sum()
    order = sorted(range(len(weights)), key=lambda r: (-(quotas[r] - counts[r]), r))
    for r in order[:rest]:
        counts[r] += 1
    return [int(c) for c in counts]


def generate_synthetic(config: SyntheticConfig, seed: int | None = None):
    """Returns ``(sentences, tagset, dictionaries)``."""
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    k = config.num_tags
    tags = TagSet(tuple(tag_names(k)) + (OTHER,), k)
    other = tags.other_index

    fillers = [f"w{j}" for j in range(config.vocab_size)]
    negatives = [f"neg{j}" for j in range(config.negative_words)]
    cues = [f"cue{j}" for j in range(config.cue_words)]
    triggers = [[trigger_word(r, j) for j in range(config.words_per_tag)] for r in range(k)]

    n = config.num_sentences
    n_neg = int(round(config.negated_fraction * n))
    n_decoy = int(round(config.decoy_fraction * n))
    n_event = n - n_neg - n_decoy
    weights = [(r + 1.0) ** -config.skew for r in range(k)]
    per_tag = apportion(n_event, weights)

    kinds = [("event", r) for r, c in enumerate(per_tag) for _ in range(c)]
    probs = np.asarray(weights) / np.sum(weights)
    kinds += [("negated", int(rng.choice(k, p=probs))) for _ in range(n_neg)]
    kinds += [("decoy", int(rng.choice(k, p=probs))) for _ in range(n_decoy)]
    kinds = [kinds[i] for i in rng.permutation(len(kinds))]

    sentences = []
    for i, (kind, rank) in enumerate(kinds):
        length = int(rng.integers(config.min_len, config.max_len + 1))
        words = [fillers[j] for j in rng.integers(0, len(fillers), length)]
        labels = [other] * length
        pos = int(rng.integers(1, length))
        words[pos] = triggers[rank][int(rng.integers(config.words_per_tag))]
        if kind == "event":
            labels[pos] = rank
        elif kind == "decoy":
            words[pos - 1] = cues[int(rng.integers(len(cues)))]
        else:
            spot = int(rng.choice([j for j in range(length) if j != pos]))
            words[spot] = negatives[int(rng.integers(len(negatives)))]
        doc_id = i // config.sentences_per_doc
        sentences.append(Sentence(doc_id, tuple(Token(w, t) for w, t in zip(words, labels))))

    raw = {tags.name(r): triggers[r] for r in range(k)}
    dicts = compile_dictionaries(raw, negatives, tags)
    return sentences, tags, dicts


def dictionaries_json(dicts: DictionarySet, tags: TagSet) -> str:
    return json.dumps(dicts.to_json(tags), indent=2, sort_keys=True) + "\n"
