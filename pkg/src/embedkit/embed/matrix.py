"""Trained embedding container, text-format I/O and neighbour queries."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..corpus import PAD, UNK, Vocabulary
from .subword import SubwordIndex


class EmbeddingFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class EmbeddingMatrix:
    """Word vectors plus optional training-side matrices.

    ``vectors`` row 0 is the padding row and stays zero. ``subword_vectors``
    and ``subword_index`` are set only for fastText models; ``node_vectors``
    only for hierarchical-softmax training.
    """

    vocab: Vocabulary
    vectors: np.ndarray
    context_vectors: np.ndarray | None = None
    subword_vectors: np.ndarray | None = None
    subword_index: SubwordIndex | None = None
    node_vectors: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.vectors.shape[0] != len(self.vocab):
            raise ValueError(f"{self.vectors.shape[0]} vectors for {len(self.vocab)} vocabulary entries")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def is_fasttext(self) -> bool:
        return self.subword_vectors is not None and self.subword_index is not None

    def word_vector(self, word: str) -> np.ndarray:
        if self.is_fasttext:
            return fasttext_word_vector(word, self)
        if word not in self.vocab:
            raise KeyError(f"word {word!r} not in vocabulary")
        return self.vectors[self.vocab.index[word]]


def fasttext_word_vector(word: str, model: EmbeddingMatrix) -> np.ndarray:
    """Sum of the subword vectors of ``word``; works for unseen words."""
    if not model.is_fasttext:
        raise ValueError("model has no subword vectors")
    index = model.subword_index
    ids = [index.bucket(u) for u in index.units(word)]
    return model.subword_vectors[ids].sum(axis=0)


def parse_header(line: str) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2:
        raise EmbeddingFormatError(1, f"expected '<vocab_size> <dim>', got {line.strip()!r}")
    try:
        size, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise EmbeddingFormatError(1, f"expected two integers, got {line.strip()!r}") from None
    if size < 0 or dim < 1:
        raise EmbeddingFormatError(1, f"invalid sizes {size} {dim}")
    return size, dim


def save_embeddings(model: EmbeddingMatrix, path: str | Path) -> None:
    """Write the word2vec text format. Padding and unknown rows are omitted."""
    words = [(i, t) for i, t in enumerate(model.vocab.tokens) if t not in (PAD, UNK)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(words)} {model.dim}\n")
        for i, token in words:
            fh.write(token + " " + " ".join(f"{x:.9g}" for x in model.vectors[i]) + "\n")


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    with open(path, encoding="utf-8") as fh:
        size, dim = parse_header(fh.readline())
        tokens: list[str] = []
        seen: set[str] = set()
        rows: list[np.ndarray] = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) == 1 and not parts[0]:
                continue
            token = parts[0]
            if len(parts) - 1 != dim:
                raise EmbeddingFormatError(lineno, f"expected {dim} values for {token!r}, got {len(parts) - 1}")
            if token in seen:
                raise EmbeddingFormatError(lineno, f"duplicate token {token!r}")
            try:
                rows.append(np.array(parts[1:], dtype=np.float64))
            except ValueError:
                raise EmbeddingFormatError(lineno, "non-numeric vector value") from None
            seen.add(token)
            tokens.append(token)
    if len(tokens) != size:
        raise EmbeddingFormatError(1, f"header declares {size} words, file has {len(tokens)}")
    vocab = Vocabulary.from_tokens(tokens)
    vectors = np.zeros((len(vocab), dim))
    for token, row in zip(tokens, rows):
        vectors[vocab.index[token]] = row
    return EmbeddingMatrix(vocab, vectors, metadata={"source": str(path)})


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.divide(v, norm, out=np.zeros_like(v), where=norm > 0)


def nearest_neighbors(model: EmbeddingMatrix, word: str, k: int = 10) -> list[tuple[str, float]]:
    """Top-k words by cosine similarity, excluding the query and special rows."""
    query = _unit(model.word_vector(word))
    sims = _unit(model.vectors) @ query
    candidates = [
        (tok, float(sims[i]))
        for i, tok in enumerate(model.vocab.tokens)
        if tok not in (PAD, UNK, word)
    ]
    candidates.sort(key=lambda item: (-item[1], item[0]))
    return candidates[:k]
