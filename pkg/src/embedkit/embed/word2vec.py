"""Word2vec building blocks: unigram noise sampler, Huffman tree and SGD steps.

Step functions take input ("center" or averaged context) vectors and output
vectors, update them in place and return the loss. The ``*_loss_and_grads``
variants are pure and exist for gradient checking.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from ..corpus import PAD_ID, UNK_ID, Vocabulary


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _neg_log_sigmoid(x):
    return np.logaddexp(0.0, -x)


class NegativeSampler:
    """Draws ids with probability proportional to count**power.

    Padding and unknown ids have probability zero.
    """

    def __init__(self, counts: np.ndarray, power: float = 0.75):
        counts = np.asarray(counts, dtype=np.float64)
        weights = np.zeros_like(counts)
        real = np.arange(len(counts)) >= 2
        weights[real] = counts[real] ** power
        total = weights.sum()
        if total <= 0:
            raise ValueError("negative sampler needs at least one word with positive count")
        self.power = power
        self.probs = weights / total
        self.cdf = np.cumsum(self.probs)
        self.cdf[-1] = 1.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        ids = np.searchsorted(self.cdf, rng.random(size), side="right")
        return np.minimum(ids, len(self.cdf) - 1)


def make_unigram_sampler(vocab: Vocabulary, power: float = 0.75) -> NegativeSampler:
    if len(vocab) <= 2:
        raise ValueError("vocabulary has no words besides <pad> and <unk>")
    return NegativeSampler(vocab.count_array, power)


@dataclass
class HuffmanTree:
    """Binary Huffman coding of the vocabulary for hierarchical softmax.

    ``codes[w]`` holds the branch bits from the root to word ``w`` and
    ``points[w]`` the internal-node ids visited on the way; internal node
    ``n`` owns row ``n`` of ``node_vectors``.
    """

    codes: list[np.ndarray]
    points: list[np.ndarray]
    node_vectors: np.ndarray

    @classmethod
    def build(cls, counts, dim: int) -> "HuffmanTree":
        counts = list(counts)
        size = len(counts)
        leaves = [w for w in range(size) if w not in (PAD_ID, UNK_ID)]
        empty = np.zeros(0, dtype=np.int64)
        codes = [empty] * size
        points = [empty] * size
        if len(leaves) < 2:
            return cls(codes, points, np.zeros((0, dim)))
        # heap entries: (count, tiebreak, node); leaves are ("leaf", w), internals ("node", n)
        heap = [(float(counts[w]), order, ("leaf", w)) for order, w in enumerate(leaves)]
        heapq.heapify(heap)
        children: list[tuple] = []
        order = len(heap)
        while len(heap) > 1:
            c0, _, left = heapq.heappop(heap)
            c1, _, right = heapq.heappop(heap)
            node = len(children)
            children.append((left, right))
            heapq.heappush(heap, (c0 + c1, order, ("node", node)))
            order += 1
        root = len(children) - 1
        stack = [(root, [], [])]
        while stack:
            node, code, path = stack.pop()
            for bit, child in enumerate(children[node]):
                kind, idx = child
                if kind == "leaf":
                    codes[idx] = np.array(code + [bit], dtype=np.int64)
                    points[idx] = np.array(path + [node], dtype=np.int64)
                else:
                    stack.append((idx, code + [bit], path + [node]))
        return cls(codes, points, np.zeros((len(children), dim)))

    def probability(self, hidden: np.ndarray, word: int) -> float:
        scores = self.node_vectors[self.points[word]] @ hidden
        signs = 1.0 - 2.0 * self.codes[word]
        return float(np.prod(sigmoid(signs * scores)))


def sgns_loss_and_grads(v: np.ndarray, u_pos: np.ndarray, u_neg: np.ndarray):
    """Loss and gradients of -log s(u_pos.v) - sum log s(-u_n.v)."""
    u_neg = np.asarray(u_neg, dtype=np.float64).reshape(-1, v.shape[0])
    s_pos = u_pos @ v
    s_neg = u_neg @ v
    loss = float(_neg_log_sigmoid(s_pos) + np.sum(_neg_log_sigmoid(-s_neg)))
    g_pos = sigmoid(s_pos) - 1.0
    g_neg = sigmoid(s_neg)
    dv = g_pos * u_pos + g_neg @ u_neg
    du_pos = g_pos * v
    du_neg = g_neg[:, None] * v[None, :]
    return loss, dv, du_pos, du_neg


def sgns_step(center_vec: np.ndarray, context_vec: np.ndarray, negative_vecs: np.ndarray, lr: float) -> float:
    """One skip-gram negative-sampling SGD step, updating all vectors in place."""
    loss, dv, du_pos, du_neg = sgns_loss_and_grads(center_vec, context_vec, negative_vecs)
    if not (math.isfinite(loss) and np.all(np.isfinite(dv))):
        raise FloatingPointError("non-finite value in skip-gram step")
    center_vec -= lr * dv
    context_vec -= lr * du_pos
    negative_vecs -= lr * du_neg.reshape(np.shape(negative_vecs))
    return loss


def cbow_loss_and_grads(context_vecs: np.ndarray, u_pos: np.ndarray, u_neg: np.ndarray):
    """Like sgns_loss_and_grads with the mean context vector as input.

    The returned context gradient applies to every context row.
    """
    count = context_vecs.shape[0]
    h = context_vecs.mean(axis=0)
    loss, dh, du_pos, du_neg = sgns_loss_and_grads(h, u_pos, u_neg)
    return loss, dh / count, du_pos, du_neg


def cbow_step(
    context_vecs: np.ndarray,
    target_id: int,
    sampler: NegativeSampler,
    output_vectors: np.ndarray,
    lr: float,
    rng: np.random.Generator,
    negatives: int = 5,
) -> float:
    """One CBOW negative-sampling step; ``context_vecs`` rows are updated in place.

    An empty context is a no-op returning 0.0.
    """
    if len(context_vecs) == 0:
        return 0.0
    neg_ids = sampler.sample(rng, negatives)
    loss, dctx, du_pos, du_neg = cbow_loss_and_grads(context_vecs, output_vectors[target_id], output_vectors[neg_ids])
    if not (math.isfinite(loss) and np.all(np.isfinite(dctx))):
        raise FloatingPointError("non-finite value in CBOW step")
    context_vecs -= lr * dctx
    output_vectors[target_id] -= lr * du_pos
    np.add.at(output_vectors, neg_ids, -lr * du_neg)
    return loss


def hierarchical_softmax_loss(hidden_vec: np.ndarray, target_id: int, tree: HuffmanTree, lr: float):
    """Negative log-probability of ``target_id`` along its Huffman path.

    Updates the path's node vectors in place (scaled by ``lr``) and returns
    ``(loss, grad_hidden)``; the caller applies the hidden gradient.
    """
    nodes = tree.points[target_id]
    labels = 1.0 - tree.codes[target_id]
    if len(nodes) == 0:
        return 0.0, np.zeros_like(hidden_vec)
    node_vecs = tree.node_vectors[nodes]
    scores = node_vecs @ hidden_vec
    loss = float(np.sum(_neg_log_sigmoid((2.0 * labels - 1.0) * scores)))
    g = sigmoid(scores) - labels
    grad_h = g @ node_vecs
    tree.node_vectors[nodes] -= lr * g[:, None] * hidden_vec[None, :]
    return loss, grad_h
