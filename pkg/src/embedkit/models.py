"""The four tweet classifiers and their training loop.

Each builder returns a :class:`LayerGraph` whose first layer is the word
embedding. Binary tasks use one sigmoid unit, multiclass tasks a softmax.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .corpus import PAD_ID, EncodedSequence, Vocabulary
from .embed.matrix import EmbeddingMatrix
from .nncore import (
    Activation,
    AdamState,
    Conv1D,
    Dense,
    Dropout,
    Embedding,
    LayerGraph,
    MaxPool,
    Recurrent,
    adam_step,
    pool_rows,
)

ARCHITECTURES = ("cnn", "bilstm", "gru", "cnn-bilstm")
RANDOM_INIT_RANGE = 0.05


# -- embedding initialization ----------------------------------------------------------


def random_embedding(vocab_size: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    weights = rng.uniform(-RANDOM_INIT_RANGE, RANDOM_INIT_RANGE, size=(vocab_size, dim))
    weights[PAD_ID] = 0.0
    return weights


def embedding_rows(vocab: Vocabulary, pretrained: EmbeddingMatrix, rng: np.random.Generator) -> np.ndarray:
    """Rows for ``vocab`` taken from a pre-trained matrix.

    Words the matrix does not know get the random initialization (fastText
    models compose them from subwords instead). The padding row is zero.
    """
    rows = random_embedding(len(vocab), pretrained.dim, rng)
    for i, token in enumerate(vocab.tokens):
        if i == PAD_ID:
            continue
        if pretrained.is_fasttext:
            rows[i] = pretrained.word_vector(token)
        elif token in pretrained.vocab:
            rows[i] = pretrained.vectors[pretrained.vocab.index[token]]
    return rows


def _embedding_layer(vocab_size, dim, emb_init, rng, trainable) -> Embedding:
    if dim < 1:
        raise ValueError(f"embedding dim must be >= 1, got {dim}")
    if isinstance(emb_init, str):
        if emb_init != "random":
            raise ValueError(f"emb_init must be 'random' or a matrix, got {emb_init!r}")
        weights = random_embedding(vocab_size, dim, rng)
    else:
        weights = np.array(emb_init, dtype=np.float64)
        if weights.shape != (vocab_size, dim):
            raise ValueError(f"pre-trained embedding has shape {weights.shape}, expected {(vocab_size, dim)}")
        weights[PAD_ID] = 0.0
    return Embedding(weights, trainable=trainable)


def _head(rng, in_dim: int, n_classes: int) -> tuple[Dense, str]:
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    if n_classes == 2:
        return Dense.create(rng, in_dim, 1), "sigmoid"
    return Dense.create(rng, in_dim, n_classes), "softmax"


def _metadata(architecture, n_classes, dim, max_len, seed, **sizes) -> dict:
    return {"architecture": architecture, "n_classes": n_classes, "dim": dim, "max_len": max_len,
            "seed": seed, **sizes}


# -- builders --------------------------------------------------------------------------


def build_cnn(vocab_size: int, dim: int, n_classes: int, emb_init="random", *, max_len: int = 64,
              filters: int = 250, kernel: int = 2, dropout: float = 0.5, trainable: bool = True,
              seed: int = 0) -> LayerGraph:
    """Embedding, convolution with ReLU, dropout, global max pool, dense."""
    rng = np.random.default_rng(seed)
    if max_len < kernel:
        raise ValueError(f"max_len {max_len} is shorter than kernel size {kernel}")
    dense, head = _head(rng, filters, n_classes)
    layers = [
        _embedding_layer(vocab_size, dim, emb_init, rng, trainable),
        Conv1D.create(rng, filters, kernel, dim),
        Activation("relu"),
        Dropout(dropout, seed=seed + 1),
        MaxPool("global"),
        dense,
    ]
    return LayerGraph(layers, head, _metadata("cnn", n_classes, dim, max_len, seed, filters=filters, kernel=kernel))


def build_bilstm(vocab_size: int, dim: int, n_classes: int, emb_init="random", *, max_len: int = 64,
                 hidden: int = 100, dropout: float = 0.5, trainable: bool = True, seed: int = 0) -> LayerGraph:
    """Embedding, bidirectional LSTM final states, dropout, dense."""
    rng = np.random.default_rng(seed)
    dense, head = _head(rng, 2 * hidden, n_classes)
    layers = [
        _embedding_layer(vocab_size, dim, emb_init, rng, trainable),
        Recurrent.create(rng, "lstm", dim, hidden, bidirectional=True),
        Dropout(dropout, seed=seed + 1),
        dense,
    ]
    return LayerGraph(layers, head, _metadata("bilstm", n_classes, dim, max_len, seed, hidden=hidden))


def build_gru(vocab_size: int, dim: int, n_classes: int, emb_init="random", *, max_len: int = 64,
              hidden: int = 100, dropout: float = 0.5, trainable: bool = True, seed: int = 0) -> LayerGraph:
    """Embedding, forward GRU final state, dropout, dense."""
    rng = np.random.default_rng(seed)
    dense, head = _head(rng, hidden, n_classes)
    layers = [
        _embedding_layer(vocab_size, dim, emb_init, rng, trainable),
        Recurrent.create(rng, "gru", dim, hidden, bidirectional=False),
        Dropout(dropout, seed=seed + 1),
        dense,
    ]
    return LayerGraph(layers, head, _metadata("gru", n_classes, dim, max_len, seed, hidden=hidden))


def build_hybrid(vocab_size: int, dim: int, n_classes: int, emb_init="random", *, max_len: int = 64,
                 filters: int = 250, kernel: int = 2, hidden: int = 250, pool_width: int = 2,
                 pool_stride: int = 2, dropout: float = 0.5, trainable: bool = True, seed: int = 0) -> LayerGraph:
    """Convolution, ReLU, dropout and local pooling feeding a bidirectional LSTM."""
    conv_steps = max_len - kernel + 1
    if conv_steps < pool_width:
        raise ValueError(f"max_len {max_len} leaves {max(conv_steps, 0)} convolution rows, "
                         f"too short for pool width {pool_width}")
    rng = np.random.default_rng(seed)
    dense, head = _head(rng, 2 * hidden, n_classes)
    layers = [
        _embedding_layer(vocab_size, dim, emb_init, rng, trainable),
        Conv1D.create(rng, filters, kernel, dim),
        Activation("relu"),
        Dropout(dropout, seed=seed + 1),
        MaxPool("local", pool_width, pool_stride),
        Recurrent.create(rng, "lstm", filters, hidden, bidirectional=True),
        dense,
    ]
    meta = _metadata("cnn-bilstm", n_classes, dim, max_len, seed, filters=filters, kernel=kernel, hidden=hidden,
                     pool_width=pool_width, pool_stride=pool_stride,
                     pooled_steps=pool_rows(conv_steps, pool_width, pool_stride))
    return LayerGraph(layers, head, meta)


BUILDERS = {"cnn": build_cnn, "bilstm": build_bilstm, "gru": build_gru, "cnn-bilstm": build_hybrid}


def build_model(architecture: str, vocab_size: int, dim: int, n_classes: int, emb_init="random",
                **options) -> LayerGraph:
    if architecture not in BUILDERS:
        raise ValueError(f"unknown architecture {architecture!r}; expected one of {ARCHITECTURES}")
    return BUILDERS[architecture](vocab_size, dim, n_classes, emb_init, **options)


def stage_param_counts(graph: LayerGraph) -> dict[str, int]:
    """Parameter counts per stage; recurrent layers are split per direction."""
    counts: dict[str, int] = {}
    for layer in graph.layers:
        if isinstance(layer, Recurrent):
            for prefix in ("fwd", "bwd"):
                n = sum(p.size for k, p in layer.params.items() if k.startswith(prefix))
                if n:
                    counts[f"{layer.cell}_{prefix}"] = n
        elif layer.params:
            counts[layer.kind] = layer.param_count()
    return counts


# -- training --------------------------------------------------------------------------


class EncodedDataset(NamedTuple):
    ids: np.ndarray
    lengths: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, index) -> "EncodedDataset":
        return EncodedDataset(self.ids[index], self.lengths[index], self.labels[index])


@dataclass
class ClassifierConfig:
    architecture: str = "cnn"
    n_classes: int = 2
    emb_trainable: bool = True
    max_len: int = 64
    lr: float = 1e-4
    min_lr: float = 1e-6
    batch_size: int = 32
    max_epochs: int = 20
    plateau_patience: int = 1
    early_stop_patience: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.n_classes not in (2, 3, 6):
            raise ValueError(f"n_classes must be 2, 3 or 6, got {self.n_classes}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.lr <= 0:
            raise ValueError("batch_size, max_epochs and lr must be positive")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patience values must be >= 1")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_macro_f: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    learning_rate: list[float] = field(default_factory=list)
    selected_epoch: int = -1


def predict_proba(graph: LayerGraph, ids: np.ndarray, lengths: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Class distributions for a batch; binary heads expand to [1 - p, p]."""
    graph.eval()
    chunks = []
    for start in range(0, len(ids), batch_size):
        p = graph.forward(ids[start:start + batch_size], lengths[start:start + batch_size])
        chunks.append(np.concatenate([1.0 - p, p], axis=1) if graph.head == "sigmoid" else p)
    width = 2 if graph.head == "sigmoid" else graph.layers[-1].params["weight"].shape[0]
    return np.concatenate(chunks) if chunks else np.zeros((0, width))


def predict(graph: LayerGraph, encoded: EncodedSequence) -> tuple[np.ndarray, int]:
    """Distribution over classes and its argmax (lowest index on ties)."""
    max_len = graph.metadata.get("max_len")
    if max_len is not None and len(encoded.ids) != max_len:
        raise ValueError(f"encoded length {len(encoded.ids)} does not match the model's max_len {max_len}")
    dist = predict_proba(graph, encoded.ids[None, :], np.array([encoded.true_length]))[0]
    return dist, int(np.argmax(dist))


def _evaluate(graph: LayerGraph, data: EncodedDataset, n_classes: int) -> tuple[float, float]:
    from .eval.metrics import confusion_matrix, macro_prf

    probs = predict_proba(graph, data.ids, data.lengths)
    picked = np.clip(probs[np.arange(len(data)), data.labels], 1e-12, 1.0)
    val_loss = float(-np.mean(np.log(picked)))
    pred = np.argmax(probs, axis=1)
    return macro_prf(confusion_matrix(data.labels, pred, n_classes))[2], val_loss


def train_classifier(graph: LayerGraph, train_set: EncodedDataset, val_set: EncodedDataset,
                     config: ClassifierConfig) -> tuple[LayerGraph, TrainHistory]:
    """Mini-batch Adam with plateau halving, early stopping and best-epoch restore.

    An epoch counts as an improvement when validation macro-F rises, or stays
    equal while validation loss falls; the tie rule keeps early epochs, where
    every prediction is still the majority class, from triggering a stop.
    """
    if len(train_set) == 0:
        raise ValueError("empty training set")
    missing = sorted(set(range(config.n_classes)) - set(np.unique(train_set.labels).tolist()))
    if missing:
        warnings.warn(f"classes {missing} are absent from the training set", RuntimeWarning, stacklevel=2)
    graph.layers[0].trainable = config.emb_trainable
    rng = np.random.default_rng(config.seed)
    state = AdamState()
    lr = config.lr
    history = TrainHistory()
    best = (-math.inf, math.inf)
    best_params = graph.snapshot()
    stale = 0
    n = len(train_set)
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        graph.train()
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            total += graph.loss_and_backward(train_set.ids[idx], train_set.lengths[idx], train_set.labels[idx]) * len(idx)
            adam_step(graph.parameters(), graph.gradients(), state, lr)
        history.train_loss.append(total / n)
        history.learning_rate.append(lr)
        macro_f, val_loss = _evaluate(graph, val_set, config.n_classes)
        history.val_macro_f.append(macro_f)
        history.val_loss.append(val_loss)
        if macro_f > best[0] or (macro_f == best[0] and val_loss < best[1]):
            best = (macro_f, val_loss)
            best_params = graph.snapshot()
            history.selected_epoch = epoch
            stale = 0
            continue
        stale += 1
        if stale >= config.early_stop_patience:
            break
        if stale % config.plateau_patience == 0 and lr / 2 >= config.min_lr:
            lr /= 2
    graph.restore(best_params)
    graph.eval()
    return graph, history


# -- sidecar metadata ------------------------------------------------------------------


def write_metadata(path: str | Path, record: dict) -> None:
    """Flat ``key=value`` lines, keys sorted; nested dicts flatten with dots."""
    flat: dict[str, str] = {}

    def walk(prefix, value):
        if isinstance(value, dict):
            for k, v in value.items():
                walk(f"{prefix}.{k}" if prefix else str(k), v)
        else:
            flat[prefix] = str(value)

    walk("", record)
    lines = [f"{k}={v}" for k, v in sorted(flat.items())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_metadata(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line and not line.startswith("#"):
            key, _, value = line.partition("=")
            out[key] = value
    return out


def config_record(config: ClassifierConfig) -> dict:
    return asdict(config)
