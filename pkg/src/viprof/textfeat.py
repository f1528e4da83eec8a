"""Tokenization, top-k vocabulary, and bag-of-words vectors.

Tokenization is deliberately minimal: lowercase, then split on every character
that is not a Unicode letter or digit. No stemming, no stopwords, no URL
handling. A profile's document is the concatenation of all its tweets.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import Profile
from .errors import DataError

# Unicode word characters minus underscore == letters + digits.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def profile_tokens(profile: Profile) -> list[str]:
    tokens: list[str] = []
    for tweet in profile.tweets:
        tokens.extend(tokenize(tweet))
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Ordered term list; dimension ids are positions in `terms`.

    Ordering: descending training frequency, ties broken lexicographically.
    """

    terms: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.terms)) != len(self.terms):
            raise DataError("vocabulary contains duplicate terms")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    @property
    def index(self) -> dict[str, int]:
        return self._index  # type: ignore[attr-defined]

    def __len__(self) -> int:
        return len(self.terms)


def build_vocabulary(docs: Iterable[Sequence[str]], k: int) -> Vocabulary:
    if k < 1:
        raise DataError(f"vocabulary size must be >= 1, got {k}")
    counts: Counter[str] = Counter()
    for doc in docs:
        counts.update(doc)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(terms=tuple(term for term, _ in ordered[:k]))


@dataclass(frozen=True)
class SparseVector:
    """Sorted (index, value) pairs; no explicit zeros."""

    dimension: int
    entries: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        last = -1
        for idx, val in self.entries:
            if not 0 <= idx < self.dimension:
                raise DataError(f"sparse index {idx} out of range for dimension {self.dimension}")
            if idx <= last:
                raise DataError("sparse indices must be strictly increasing")
            if val == 0.0:
                raise DataError("sparse vectors must not store explicit zeros")
            last = idx

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dimension, dtype=np.float64)
        for idx, val in self.entries:
            dense[idx] = val
        return dense

    def __add__(self, other: "SparseVector") -> "SparseVector":
        if self.dimension != other.dimension:
            raise DataError("cannot add sparse vectors of different dimensions")
        sums: dict[int, float] = dict(self.entries)
        for idx, val in other.entries:
            sums[idx] = sums.get(idx, 0.0) + val
        entries = tuple((i, v) for i, v in sorted(sums.items()) if v != 0.0)
        return SparseVector(dimension=self.dimension, entries=entries)


def vectorize(tokens: Sequence[str], vocab: Vocabulary, binary: bool = False) -> SparseVector:
    """Raw term counts over the vocabulary; OOV tokens are ignored.

    With binary=True each present term gets value 1.0 instead of its count.
    """
    index = vocab.index
    counts: Counter[int] = Counter()
    for token in tokens:
        dim = index.get(token)
        if dim is not None:
            counts[dim] += 1
    entries = tuple(
        (idx, 1.0 if binary else float(n)) for idx, n in sorted(counts.items())
    )
    return SparseVector(dimension=len(vocab), entries=entries)


def vocabulary_to_json(vocab: Vocabulary) -> list[str]:
    return list(vocab.terms)


def vocabulary_from_json(terms: list[str]) -> Vocabulary:
    return Vocabulary(terms=tuple(terms))
