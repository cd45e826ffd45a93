"""Word vectors read from the textual word2vec/fastText layout.

The first line holds ``vocab_size dim``; every following line is a token and
``dim`` floats.  Unknown words get a vector derived from ``(seed, word)``, so
the same word always maps to the same OOV vector no matter when or how often
it is looked up.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ruletag.errors import ConfigError, DataError, ParseError

OOV_POLICIES = ("random_normal", "zeros")


@dataclass
class EmbeddingStore:
    dim: int
    table: dict[str, np.ndarray] = field(default_factory=dict)
    trainable: bool = True
    oov_policy: str = "random_normal"
    seed: int = 0
    _oov: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dim <= 0:
            raise ConfigError(f"embedding dim must be positive, got {self.dim}")
        if self.oov_policy not in OOV_POLICIES:
            raise ConfigError(f"unknown oov_policy {self.oov_policy!r}")

    def __contains__(self, word):
        return word in self.table

    def __len__(self):
        return len(self.table)

    def lookup(self, word: str) -> np.ndarray:
        vec = self.table.get(word)
        if vec is not None:
            return vec
        vec = self._oov.get(word)
        if vec is None:
            vec = self._make_oov(word)
            self._oov[word] = vec
        return vec

    def _make_oov(self, word):
        if self.oov_policy == "zeros":
            return np.zeros(self.dim)
        digest = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
        rng = np.random.default_rng([self.seed, int.from_bytes(digest, "little")])
        return rng.normal(0.0, 1.0 / np.sqrt(self.dim), self.dim)

    def matrix(self, words: Iterable[str]) -> np.ndarray:
        return np.array([self.lookup(w) for w in words], dtype=np.float64).reshape(-1, self.dim)


def load_vectors(text, trainable=True, oov_policy="random_normal", seed=0, source=None) -> EmbeddingStore:
    lines = text.splitlines() if isinstance(text, str) else (l.rstrip("\r\n") for l in text)
    lines = iter(lines)
    header = next(lines, None)
    if header is None:
        raise ParseError("empty vector file", 1, source)
    try:
        vocab_size, dim = (int(x) for x in header.split())
    except ValueError:
        raise ParseError(f"bad header {header!r}, expected 'vocab_size dim'", 1, source) from None
    if vocab_size < 0 or dim <= 0:
        raise ParseError(f"bad header {header!r}", 1, source)

    table: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines, start=2):
        if lineno - 1 > vocab_size:
            break
        parts = line.split()
        if not parts:
            continue
        word, values = parts[0], parts[1:]
        if len(values) != dim:
            raise ParseError(f"expected {dim} components, got {len(values)}", lineno, source)
        try:
            vec = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError:
            raise ParseError("non-numeric vector component", lineno, source) from None
        table.setdefault(word, vec)
    return EmbeddingStore(dim, table, trainable=trainable, oov_policy=oov_policy, seed=seed)


def coverage(store: EmbeddingStore, vocab) -> float:
    vocab = set(vocab)
    if not vocab:
        raise DataError("coverage needs a non-empty vocabulary")
    return sum(1 for w in vocab if w in store.table) / len(vocab)


def lookup(store: EmbeddingStore, word: str) -> np.ndarray:
    return store.lookup(word)


def format_vectors(store: EmbeddingStore) -> str:
    rows = [f"{len(store.table)} {store.dim}"]
    for word, vec in store.table.items():
        rows.append(word + " " + " ".join(repr(float(x)) for x in vec))
    return "\n".join(rows) + "\n"
