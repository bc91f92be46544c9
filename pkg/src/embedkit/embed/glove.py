"""GloVe: windowed co-occurrence counts and weighted least squares with AdaGrad."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..corpus import PAD_ID, UNK_ID, Vocabulary
from .matrix import EmbeddingMatrix


@dataclass
class CooccurrenceMap:
    """Sparse symmetric map (i, j) -> X_ij with X_ij > 0."""

    size: int
    cells: dict[tuple[int, int], float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cells)

    def __getitem__(self, key: tuple[int, int]) -> float:
        return self.cells.get(key, 0.0)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Rows, columns and values in sorted key order."""
        keys = sorted(self.cells)
        if not keys:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0)
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        vals = np.array([self.cells[k] for k in keys])
        return rows, cols, vals


def build_cooccurrence(
    corpus: Iterable[Sequence[int]],
    vocab: Vocabulary,
    window: int = 5,
    distance_weighting: bool = True,
) -> CooccurrenceMap:
    """Count word pairs within ``window`` positions of each other.

    Each pair at distance d adds 1/d (or 1 without weighting) to both (i, j)
    and (j, i). Padding and unknown ids are skipped but still occupy their
    positions.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    cells: dict[tuple[int, int], float] = defaultdict(float)
    for sentence in corpus:
        ids = list(sentence)
        for pos, i in enumerate(ids):
            if i in (PAD_ID, UNK_ID):
                continue
            for d in range(1, window + 1):
                if pos + d >= len(ids):
                    break
                j = ids[pos + d]
                if j in (PAD_ID, UNK_ID):
                    continue
                inc = 1.0 / d if distance_weighting else 1.0
                cells[(i, j)] += inc
                cells[(j, i)] += inc
    return CooccurrenceMap(len(vocab), dict(cells))


def glove_weight(x: float, x_max: float = 100.0, alpha: float = 0.75) -> float:
    if x <= 0:
        raise ValueError(f"co-occurrence value must be positive, got {x}")
    return (x / x_max) ** alpha if x < x_max else 1.0


def _weights(vals: np.ndarray, x_max: float, alpha: float) -> np.ndarray:
    return np.where(vals < x_max, (vals / x_max) ** alpha, 1.0)


@dataclass
class GloveState:
    """Biases, AdaGrad accumulators and shuffling RNG for GloVe training."""

    bias: np.ndarray
    context_bias: np.ndarray
    grad_sq: np.ndarray
    context_grad_sq: np.ndarray
    bias_grad_sq: np.ndarray
    context_bias_grad_sq: np.ndarray
    rng: np.random.Generator
    x_max: float = 100.0
    alpha: float = 0.75

    @classmethod
    def create(cls, size: int, dim: int, seed: int = 0, x_max: float = 100.0,
               alpha: float = 0.75, initial_accumulator: float = 1.0) -> "GloveState":
        return cls(
            bias=np.zeros(size),
            context_bias=np.zeros(size),
            grad_sq=np.full((size, dim), initial_accumulator),
            context_grad_sq=np.full((size, dim), initial_accumulator),
            bias_grad_sq=np.full(size, initial_accumulator),
            context_bias_grad_sq=np.full(size, initial_accumulator),
            rng=np.random.default_rng(seed),
            x_max=x_max,
            alpha=alpha,
        )


def glove_objective(cooc: CooccurrenceMap, model: EmbeddingMatrix, state: GloveState) -> float:
    rows, cols, vals = cooc.arrays()
    w, wc = model.vectors, model.context_vectors
    diff = np.einsum("ij,ij->i", w[rows], wc[cols]) + state.bias[rows] + state.context_bias[cols] - np.log(vals)
    return float(0.5 * np.sum(_weights(vals, state.x_max, state.alpha) * diff**2))


def glove_epoch(cooc: CooccurrenceMap, model: EmbeddingMatrix, state: GloveState, lr: float = 0.05) -> float:
    """One shuffled AdaGrad pass over all stored cells.

    Returns the objective evaluated with the parameters as they were before
    the pass.
    """
    if model.context_vectors is None:
        raise ValueError("GloVe training needs context vectors")
    objective = glove_objective(cooc, model, state)
    rows, cols, vals = cooc.arrays()
    order = state.rng.permutation(len(vals))
    weights = _weights(vals, state.x_max, state.alpha)
    log_vals = np.log(vals)
    w, wc = model.vectors, model.context_vectors
    b, bc = state.bias, state.context_bias
    gw, gwc, gb, gbc = state.grad_sq, state.context_grad_sq, state.bias_grad_sq, state.context_bias_grad_sq
    for n in order:
        i, j = rows[n], cols[n]
        wi, wj = w[i], wc[j]
        fdiff = weights[n] * (wi @ wj + b[i] + bc[j] - log_vals[n])
        if not math.isfinite(fdiff):
            raise FloatingPointError(f"non-finite GloVe gradient at cell ({i}, {j}), X={vals[n]}")
        grad_i = fdiff * wj
        grad_j = fdiff * wi
        gw[i] += grad_i * grad_i
        gwc[j] += grad_j * grad_j
        w[i] -= lr * grad_i / np.sqrt(gw[i])
        wc[j] -= lr * grad_j / np.sqrt(gwc[j])
        gb[i] += fdiff * fdiff
        gbc[j] += fdiff * fdiff
        b[i] -= lr * fdiff / math.sqrt(gb[i])
        bc[j] -= lr * fdiff / math.sqrt(gbc[j])
    return objective
