"""Character n-gram hashing for fastText-style word representations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_FNV_OFFSET = 2166136261
_FNV_PRIME = 16777619


def fnv1a(data: bytes) -> int:
    """32-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFF
    return h


@dataclass(frozen=True)
class SubwordIndex:
    bucket_count: int = 2_000_000
    ngram_min: int = 3
    ngram_max: int = 6

    def __post_init__(self) -> None:
        if self.bucket_count < 1:
            raise ValueError("bucket_count must be >= 1")
        if not 1 <= self.ngram_min <= self.ngram_max:
            raise ValueError("need 1 <= ngram_min <= ngram_max")

    def bucket(self, unit: str) -> int:
        return fnv1a(unit.encode("utf-8")) % self.bucket_count

    def units(self, word: str) -> list[str]:
        """Distinct character n-grams of ``<word>``, whole bracketed word last.

        The whole word is always present even when it is longer than
        ``ngram_max``; when it also qualifies as an n-gram it appears once.
        """
        bracketed = f"<{word}>"
        seen: dict[str, None] = {}
        for n in range(self.ngram_min, self.ngram_max + 1):
            for start in range(len(bracketed) - n + 1):
                gram = bracketed[start:start + n]
                if gram != bracketed:
                    seen.setdefault(gram)
        seen.setdefault(bracketed)
        return list(seen)


def extract_ngrams(word: str, ngram_min: int, ngram_max: int, index: SubwordIndex) -> list[int]:
    if not word:
        raise ValueError("word must be nonempty")
    if (ngram_min, ngram_max) != (index.ngram_min, index.ngram_max):
        index = SubwordIndex(index.bucket_count, ngram_min, ngram_max)
    return [index.bucket(u) for u in index.units(word)]


def word_units(words: list[str], index: SubwordIndex) -> list[np.ndarray]:
    """Bucket ids for every word of a vocabulary, in vocabulary order."""
    return [np.array([index.bucket(u) for u in index.units(w)], dtype=np.int64) for w in words]
