"""Dictionary rules and the per-token multi-hot rule vector.

For token i the vector has one bit per tag (including ``O``).  Bit t is set
when some word in the window i-l .. i+l (clamped to the sentence) is in the
synonym set of tag t.  A token with no firing tag gets the ``O`` bit.  If the
sentence contains a negative-dictionary word, every token gets ``O`` only
(``negative_scope="token"`` restricts that override to the matching token).
"""
from __future__ import annotations

import json
from functools import cached_property
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ruletag.corpus import OTHER, Sentence, TagSet
from ruletag.errors import ConfigError, DataError

MATCH_MODES = ("exact", "similarity")
NEGATIVE_SCOPES = ("sentence", "token")


@dataclass(frozen=True)
class DictionarySet:
    synonyms: Mapping[int, frozenset]
    negative: frozenset
    n_tags: int
    other_index: int
    case_fold: bool = True

    def __post_init__(self):
        if self.other_index in self.synonyms:
            raise DataError("the other tag cannot own a synonym set")

    @cached_property
    def word_tags(self) -> dict[str, list[int]]:
        index: dict[str, list[int]] = {}
        for tag in sorted(self.synonyms):
            for word in self.synonyms[tag]:
                index.setdefault(word, []).append(tag)
        return index

    def to_json(self, tags: TagSet) -> dict:
        return {
            "synonyms": {tags.name(t): sorted(ws) for t, ws in sorted(self.synonyms.items())},
            "negative": sorted(self.negative),
        }


@dataclass(frozen=True)
class RuleConfig:
    window: int = 2
    match_mode: str = "exact"
    similarity_threshold: float = 0.7
    case_fold: bool = True
    negative_scope: str = "sentence"

    def __post_init__(self):
        if self.window < 0:
            raise ConfigError(f"window must be >= 0, got {self.window}")
        if self.match_mode not in MATCH_MODES:
            raise ConfigError(f"match_mode must be one of {MATCH_MODES}")
        if not 0.0 < self.similarity_threshold <= 1.0:
            raise ConfigError("similarity_threshold must lie in (0, 1]")
        if self.negative_scope not in NEGATIVE_SCOPES:
            raise ConfigError(f"negative_scope must be one of {NEGATIVE_SCOPES}")


def _fold(word, case_fold):
    return word.casefold() if case_fold else word


def compile_dictionaries(raw: Mapping[str, Sequence[str]], negative: Sequence[str], tags: TagSet,
                         case_fold: bool = True) -> DictionarySet:
    synonyms: dict[int, set] = {}
    for name, words in raw.items():
        if name == OTHER:
            raise DataError("the other tag 'O' cannot have a synonym dictionary")
        if name not in tags.names:
            raise DataError(f"dictionary tag {name!r} is not in the tag set")
        bucket = synonyms.setdefault(tags.index(name), set())
        for w in words:
            if not w:
                raise DataError(f"empty word in dictionary for {name!r}")
            bucket.add(_fold(w, case_fold))
    neg = set()
    for w in negative:
        if not w:
            raise DataError("empty word in negative dictionary")
        neg.add(_fold(w, case_fold))
    return DictionarySet(
        {t: frozenset(ws) for t, ws in synonyms.items()}, frozenset(neg),
        len(tags), tags.other_index, case_fold,
    )


def load_dictionaries(text: str, tags: TagSet, case_fold: bool = True) -> DictionarySet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"dictionary file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("synonyms", {}), dict):
        raise DataError("dictionary file must be an object with 'synonyms' and 'negative'")
    return compile_dictionaries(doc.get("synonyms", {}), doc.get("negative", []), tags, case_fold)


def _similarity_hits(words, dicts, config, store):
    vecs = np.array([store.lookup(w) for w in words], dtype=np.float64)
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    unit = np.divide(vecs, norms, out=np.zeros_like(vecs), where=norms > 0)

    def matches(vocab):
        found = np.array([w in vocab for w in words], dtype=bool)
        vocab = sorted(vocab)
        if vocab:
            dv = np.array([store.lookup(w) for w in vocab], dtype=np.float64)
            dn = np.linalg.norm(dv, axis=1, keepdims=True)
            du = np.divide(dv, dn, out=np.zeros_like(dv), where=dn > 0)
            found |= (unit @ du.T >= config.similarity_threshold).any(axis=1)
        return found

    neg = matches(dicts.negative)
    hits = [[] for _ in words]
    for tag in sorted(dicts.synonyms):
        for j in np.flatnonzero(matches(dicts.synonyms[tag])):
            hits[j].append(tag)
    return neg, hits


def apply_rules(sentence, dicts: DictionarySet, config: RuleConfig = RuleConfig(), store=None) -> np.ndarray:
    """Rule vectors for one sentence as an ``(n, n_tags)`` array of 0/1."""
    words = sentence.words if isinstance(sentence, Sentence) else list(sentence)
    words = [_fold(w, config.case_fold) for w in words]
    n = len(words)
    out = np.zeros((n, dicts.n_tags), dtype=np.int8)

    if config.match_mode == "similarity":
        if store is None:
            raise ConfigError("similarity matching needs an embedding store")
        neg, hits = _similarity_hits(words, dicts, config, store)
    else:
        index = dicts.word_tags
        neg = np.array([w in dicts.negative for w in words], dtype=bool)
        hits = [index.get(w, ()) for w in words]

    if config.negative_scope == "sentence" and neg.any():
        out[:, dicts.other_index] = 1
        return out

    l = config.window
    for j, tags in enumerate(hits):
        if tags:
            out[max(0, j - l):j + l + 1, list(tags)] = 1
    if config.negative_scope == "token":
        out[neg] = 0
    out[~out.any(axis=1), dicts.other_index] = 1
    return out


def rule_only_predict(vectors) -> list[int]:
    """Lowest-indexed set bit per token."""
    return [int(np.flatnonzero(row)[0]) for row in np.asarray(vectors)]
