"""Embedding training entry points."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from ..corpus import PAD_ID, UNK_ID, Vocabulary, build_vocab, iter_sentences
from .config import EmbConfig
from .glove import GloveState, build_cooccurrence, glove_epoch
from .matrix import EmbeddingMatrix
from .subword import SubwordIndex, word_units
from .word2vec import HuffmanTree, NegativeSampler, _neg_log_sigmoid, sigmoid

log = logging.getLogger(__name__)

MIN_LR_FRACTION = 1e-4


def train_embeddings(corpus_path: str | Path, config: EmbConfig, normalize_text: bool = True) -> EmbeddingMatrix:
    """Train one embedding model on a one-sentence-per-line corpus file."""
    path = Path(corpus_path)
    if not path.is_file():
        raise FileNotFoundError(f"corpus not found: {path}")
    sentences = list(iter_sentences(path, normalized=normalize_text))
    model = train_on_sentences(sentences, config)
    model.metadata["corpus"] = str(path)
    model.metadata["normalized"] = normalize_text
    return model


def train_on_sentences(sentences: Sequence[Sequence[str]], config: EmbConfig) -> EmbeddingMatrix:
    vocab = build_vocab((tok for s in sentences for tok in s), config.min_count)
    if len(vocab) <= 2:
        raise ValueError(f"empty effective corpus: no token occurs at least {config.min_count} times")
    encoded = []
    for s in sentences:
        ids = np.array([vocab.index.get(t, UNK_ID) for t in s], dtype=np.int64)
        encoded.append(ids)
    if config.algorithm == "glove":
        return _train_glove(encoded, vocab, config)
    return _Word2VecTrainer(vocab, config).train(encoded)


def _metadata(config: EmbConfig) -> dict:
    return {
        "algorithm": config.algorithm,
        "dim": config.dim,
        "window": config.window,
        "min_count": config.min_count,
        "epochs": config.epochs,
        "seed": config.seed,
    }


def _init_input(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    bound = 0.5 / dim
    return rng.uniform(-bound, bound, size=(rows, dim))


def _train_glove(encoded: list[np.ndarray], vocab: Vocabulary, config: EmbConfig) -> EmbeddingMatrix:
    rng = np.random.default_rng(config.seed)
    cooc = build_cooccurrence(encoded, vocab, config.window, config.distance_weighting)
    if len(cooc) == 0:
        raise ValueError("empty effective corpus: no co-occurring word pairs")
    vectors = _init_input(rng, len(vocab), config.dim)
    vectors[[PAD_ID, UNK_ID]] = 0.0
    model = EmbeddingMatrix(vocab, vectors, context_vectors=np.zeros_like(vectors), metadata=_metadata(config))
    state = GloveState.create(len(vocab), config.dim, seed=config.seed + 1, x_max=config.x_max, alpha=config.alpha)
    history = []
    for epoch in range(config.epochs):
        objective = glove_epoch(cooc, model, state, config.learning_rate)
        history.append(objective)
        log.info("glove epoch %d objective %.6f", epoch + 1, objective)
    model.metadata.update(
        distance_weighting=config.distance_weighting,
        x_max=config.x_max,
        alpha=config.alpha,
        epoch_objective=history,
        cells=len(cooc),
    )
    model.metadata["bias"] = state.bias
    model.metadata["context_bias"] = state.context_bias
    return model


class _Word2VecTrainer:
    """Per-token SGD for skip-gram and CBOW, with or without subwords."""

    def __init__(self, vocab: Vocabulary, config: EmbConfig):
        self.vocab = vocab
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        dim = config.dim
        size = len(vocab)
        counts = vocab.count_array
        self.total_words = counts.sum()
        if config.subsample_t > 0:
            freq = np.maximum(counts / self.total_words, 1e-300)
            ratio = config.subsample_t / freq
            self.keep_prob = np.minimum(1.0, (np.sqrt(1.0 / ratio) + 1.0) * ratio)
        else:
            self.keep_prob = np.ones(size)

        self.units = None
        self.subword_index = None
        if config.is_fasttext:
            self.subword_index = SubwordIndex(config.bucket_count, config.ngram_min, config.ngram_max)
            self.units = [np.zeros(0, dtype=np.int64)] * 2 + word_units(vocab.tokens[2:], self.subword_index)
            used = np.unique(np.concatenate(self.units[2:]))
            # untouched buckets stay zero
            self.input = np.zeros((config.bucket_count, dim))
            self.input[used] = _init_input(self.rng, len(used), dim)
        else:
            self.input = _init_input(self.rng, size, dim)
            self.input[[PAD_ID, UNK_ID]] = 0.0

        self.hs = config.objective == "hierarchical-softmax"
        if self.hs:
            self.tree = HuffmanTree.build(counts, dim)
            self.output = self.tree.node_vectors
        else:
            self.sampler = NegativeSampler(counts, config.sample_power)
            self.output = np.zeros((size, dim))
        self.words_done = 0
        self.skipped_contexts = 0

    # -- input representation ------------------------------------------------

    def _input_rows(self, word_ids: np.ndarray) -> np.ndarray:
        if self.units is None:
            return word_ids
        return np.concatenate([self.units[w] for w in word_ids])

    def _spread(self, n_words: int, n_rows: int) -> int:
        # word vectors get the exact gradient of the mean; subword rows each get
        # the word's share undivided, as in the reference fastText, otherwise
        # a word with ~20 units would learn ~20x slower than a word2vec vector
        return n_words if self.units is not None else n_rows

    # -- output side ---------------------------------------------------------

    def _targets(self, targets: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        if self.hs:
            ids = np.concatenate([self.tree.points[t] for t in targets])
            labels = np.concatenate([1.0 - self.tree.codes[t] for t in targets])
            return ids, labels
        k = self.config.negatives
        negs = self.sampler.sample(rng, (len(targets), k))
        ids = np.concatenate([targets[:, None], negs], axis=1).ravel()
        labels = np.zeros((len(targets), k + 1))
        labels[:, 0] = 1.0
        return ids, labels.ravel()

    def _output_update(self, h: np.ndarray, ids: np.ndarray, labels: np.ndarray, lr: float):
        out = self.output[ids]
        scores = out @ h
        loss = float(np.sum(_neg_log_sigmoid((2.0 * labels - 1.0) * scores)))
        g = sigmoid(scores) - labels
        dh = g @ out
        np.add.at(self.output, ids, -lr * g[:, None] * h[None, :])
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite loss during embedding training")
        return loss, dh

    # -- main loop -----------------------------------------------------------

    def _sentence(self, sent: np.ndarray, lr: float, rng: np.random.Generator) -> tuple[float, int]:
        cfg = self.config
        sent = sent[sent >= 2]
        if len(sent) and cfg.subsample_t > 0:
            sent = sent[rng.random(len(sent)) < self.keep_prob[sent]]
        loss_sum, steps = 0.0, 0
        n = len(sent)
        for pos in range(n):
            b = int(rng.integers(1, cfg.window + 1))
            ctx = np.concatenate([sent[max(0, pos - b):pos], sent[pos + 1:pos + 1 + b]])
            if len(ctx) == 0:
                self.skipped_contexts += 1
                continue
            center = sent[pos]
            if cfg.is_cbow:
                rows = self._input_rows(ctx)
                h = self.input[rows].mean(axis=0)
                ids, labels = self._targets(np.array([center]), rng)
                loss, dh = self._output_update(h, ids, labels, lr)
                np.add.at(self.input, rows, -lr * dh / self._spread(len(ctx), len(rows)))
            else:
                rows = self._input_rows(np.array([center]))
                h = self.input[rows].mean(axis=0)
                ids, labels = self._targets(ctx, rng)
                loss, dh = self._output_update(h, ids, labels, lr)
                np.add.at(self.input, rows, -lr * dh / self._spread(1, len(rows)))
            loss_sum += loss
            steps += 1
        return loss_sum, steps

    def _run_shard(self, shard: list[np.ndarray], rng: np.random.Generator, total: float) -> tuple[float, int]:
        lr0 = self.config.learning_rate
        loss_sum, steps = 0.0, 0
        for sent in shard:
            lr = lr0 * max(MIN_LR_FRACTION, 1.0 - self.words_done / total)
            sl, st = self._sentence(sent, lr, rng)
            loss_sum += sl
            steps += st
            self.words_done += int(np.count_nonzero(sent >= 2))
        return loss_sum, steps

    def train(self, encoded: list[np.ndarray]) -> EmbeddingMatrix:
        cfg = self.config
        total = max(1.0, float(sum(np.count_nonzero(s >= 2) for s in encoded)) * cfg.epochs)
        history = []
        worker_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.workers)]
        for epoch in range(cfg.epochs):
            if cfg.workers == 1:
                loss_sum, steps = self._run_shard(encoded, self.rng, total)
            else:
                # hogwild: workers share the parameter matrices without locks
                shards = [encoded[i::cfg.workers] for i in range(cfg.workers)]
                with ThreadPoolExecutor(cfg.workers) as pool:
                    results = list(pool.map(self._run_shard, shards, worker_rngs, [total] * cfg.workers))
                loss_sum = sum(r[0] for r in results)
                steps = sum(r[1] for r in results)
            mean_loss = loss_sum / max(steps, 1)
            history.append(mean_loss)
            log.info("%s epoch %d mean loss %.6f", cfg.algorithm, epoch + 1, mean_loss)
        return self._export(history)

    def _export(self, history: list[float]) -> EmbeddingMatrix:
        cfg = self.config
        meta = _metadata(cfg)
        meta.update(objective=cfg.objective, negatives=cfg.negatives, epoch_loss=history,
                    skipped_contexts=self.skipped_contexts, subsample_t=cfg.subsample_t)
        if cfg.is_fasttext:
            vectors = np.zeros((len(self.vocab), cfg.dim))
            for w in range(2, len(self.vocab)):
                vectors[w] = self.input[self.units[w]].sum(axis=0)
            meta.update(ngram_min=cfg.ngram_min, ngram_max=cfg.ngram_max, bucket_count=cfg.bucket_count)
            return EmbeddingMatrix(
                self.vocab, vectors,
                context_vectors=None if self.hs else self.output,
                subword_vectors=self.input,
                subword_index=self.subword_index,
                node_vectors=self.output if self.hs else None,
                metadata=meta,
            )
        return EmbeddingMatrix(
            self.vocab, self.input,
            context_vectors=None if self.hs else self.output,
            node_vectors=self.output if self.hs else None,
            metadata=meta,
        )

