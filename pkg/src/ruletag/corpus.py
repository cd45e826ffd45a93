"""Token/tag corpora in the three-column ``token doc_id TAG`` layout.

One token per line, a blank line between sentences.  Any run of horizontal
whitespace separates columns on read; a single tab is written on output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ruletag.errors import ConfigError, DataError, ParseError

OTHER = "O"
SUBSAMPLE_PERCENTS = (20, 40, 60, 80, 100)


@dataclass(frozen=True)
class TagSet:
    names: tuple[str, ...]
    other_index: int

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DataError(f"duplicate tag names in {self.names!r}")
        if any(not n for n in self.names):
            raise DataError("empty tag name")
        if self.names.count(OTHER) != 1 or self.names[self.other_index] != OTHER:
            raise DataError("tag set must contain exactly one 'O' tag at other_index")

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "TagSet":
        names = list(names)
        if OTHER not in names:
            names.append(OTHER)
        return cls(tuple(names), names.index(OTHER))

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown tag {name!r}") from None

    def name(self, idx: int) -> str:
        return self.names[idx]

    @property
    def labels(self) -> list[int]:
        """Ids of every non-other tag."""
        return [i for i in range(len(self.names)) if i != self.other_index]


@dataclass(frozen=True)
class Token:
    surface: str
    tag: int

    def __post_init__(self):
        if not self.surface or any(ch.isspace() for ch in self.surface):
            raise DataError(f"invalid token surface {self.surface!r}")


@dataclass(frozen=True)
class Sentence:
    doc_id: int
    tokens: tuple[Token, ...]

    def __post_init__(self):
        if self.doc_id < 0:
            raise DataError(f"negative doc id {self.doc_id}")
        if not self.tokens:
            raise DataError("empty sentence")

    def __len__(self):
        return len(self.tokens)

    @property
    def words(self) -> list[str]:
        return [t.surface for t in self.tokens]

    @property
    def tags(self) -> list[int]:
        return [t.tag for t in self.tokens]

    @classmethod
    def build(cls, doc_id: int, words: Sequence[str], tags: Sequence[int]) -> "Sentence":
        if len(words) != len(tags):
            raise DataError("words and tags differ in length")
        return cls(doc_id, tuple(Token(w, t) for w, t in zip(words, tags)))


@dataclass
class CorpusSplit:
    train: list[Sentence]
    val: list[Sentence]
    test: list[Sentence]
    fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)
    seed: int | None = None
    percent: int = 100
    doc_ids: dict[str, list[int]] = field(default_factory=dict)


def _lines(text) -> Iterable[str]:
    if isinstance(text, str):
        return text.splitlines()
    return (line.rstrip("\r\n") for line in text)


def parse_corpus(text, tagset: TagSet | None = None, source: str | None = None):
    """Parse a three-column corpus.

    ``text`` is a string or any iterable of lines (an open file works).
    Without ``tagset``, tag ids are assigned in first-seen order and ``O``
    is appended if it never occurs.  With ``tagset``, tags are mapped onto
    it and an unknown tag is a parse error.

    Returns ``(sentences, tagset)``.
    """
    names: dict[str, int] = {} if tagset is None else {n: i for i, n in enumerate(tagset)}
    sentences: list[Sentence] = []
    rows: list[tuple[str, str]] = []
    doc_id = None

    def flush():
        nonlocal rows, doc_id
        if rows:
            sentences.append(Sentence(doc_id, tuple(Token(w, names[t]) for w, t in rows)))
        rows = []
        doc_id = None

    for lineno, line in enumerate(_lines(text), start=1):
        parts = line.split()
        if not parts:
            flush()
            continue
        if len(parts) != 3:
            raise ParseError(f"expected 3 columns, got {len(parts)}", lineno, source)
        word, doc, tag = parts
        try:
            doc = int(doc)
        except ValueError:
            raise ParseError(f"doc id {doc!r} is not an integer", lineno, source) from None
        if doc < 0:
            raise ParseError(f"negative doc id {doc}", lineno, source)
        if doc_id is not None and doc != doc_id:
            raise ParseError(f"doc id {doc} differs from sentence doc id {doc_id}", lineno, source)
        if tag not in names:
            if tagset is not None:
                raise ParseError(f"tag {tag!r} not in tag set", lineno, source)
            names[tag] = len(names)
        doc_id = doc
        rows.append((word, tag))
    flush()
    if not sentences:
        raise ParseError("empty corpus", None, source)
    if tagset is None:
        tagset = TagSet.from_names(names)
    return sentences, tagset


def format_corpus(sentences: Iterable[Sentence], tagset: TagSet) -> str:
    blocks = []
    for s in sentences:
        blocks.append("".join(f"{t.surface}\t{s.doc_id}\t{tagset.name(t.tag)}\n" for t in s.tokens))
    return "\n".join(blocks)


def iob_to_to(tags: Sequence[str]) -> list[str]:
    """Collapse IOB tags into the prefix-free scheme: ``B-X``/``I-X`` -> ``X``."""
    out = []
    for tag in tags:
        if tag == OTHER:
            out.append(OTHER)
        elif tag.startswith(("B-", "I-")) and len(tag) > 2:
            out.append(tag[2:])
        else:
            raise DataError(f"not an IOB tag: {tag!r}")
    return out


def doc_order(sentences: Iterable[Sentence]) -> list[int]:
    seen = {}
    for s in sentences:
        seen.setdefault(s.doc_id, None)
    return list(seen)


def _partition_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    sizes = [int(math.floor(f * n + 0.5)) for f in fractions]
    sizes[0] = n - sum(sizes[1:])
    # every non-empty fraction gets at least one document, taken from the largest part
    for i, f in enumerate(fractions):
        if f > 0 and sizes[i] == 0:
            j = max(range(len(sizes)), key=lambda k: sizes[k])
            sizes[j] -= 1
            sizes[i] += 1
    return sizes


def split_corpus(sentences: Sequence[Sentence], fractions=(0.7, 0.1, 0.2), seed: int = 0) -> CorpusSplit:
    """Document-level train/val/test split.

    Documents are shuffled with a seeded generator and partitioned by
    document count; sentence order inside each part follows the input.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    docs = doc_order(sentences)
    if len(docs) < 3:
        raise DataError(f"need at least 3 documents to split, got {len(docs)}")
    rng = np.random.default_rng(seed)
    perm = [docs[i] for i in rng.permutation(len(docs))]
    n_train, n_val, _ = _partition_sizes(len(docs), fractions)
    parts = {
        "train": perm[:n_train],
        "val": perm[n_train:n_train + n_val],
        "test": perm[n_train + n_val:],
    }
    where = {d: name for name, ds in parts.items() for d in ds}
    buckets = {"train": [], "val": [], "test": []}
    for s in sentences:
        buckets[where[s.doc_id]].append(s)
    return CorpusSplit(
        buckets["train"], buckets["val"], buckets["test"],
        fractions=fractions, seed=seed,
        doc_ids={k: sorted(v) for k, v in parts.items()},
    )


def subsample_indices(n: int, percent: int, seed: int) -> list[int]:
    """Ascending indices of the train sentences kept at ``percent``.

    A single seeded permutation is cut at ceil(percent * n / 100), so the
    kept sets are nested across percents for one seed.
    """
    if percent not in SUBSAMPLE_PERCENTS:
        raise ConfigError(f"percent must be one of {SUBSAMPLE_PERCENTS}, got {percent}")
    keep = -(-percent * n // 100)
    perm = np.random.default_rng(seed).permutation(n)
    return sorted(int(i) for i in perm[:keep])


def subsample_train(split: CorpusSplit, percent: int, seed: int) -> CorpusSplit:
    idx = subsample_indices(len(split.train), percent, seed)
    return CorpusSplit(
        [split.train[i] for i in idx], split.val, split.test,
        fractions=split.fractions, seed=split.seed, percent=percent,
        doc_ids=split.doc_ids,
    )


def vocabulary(sentences: Iterable[Sentence]) -> set[str]:
    return {t.surface for s in sentences for t in s.tokens}


def tag_counts(sentences: Iterable[Sentence], n_tags: int) -> np.ndarray:
    counts = np.zeros(n_tags, dtype=np.int64)
    for s in sentences:
        for t in s.tokens:
            counts[t.tag] += 1
    return counts
