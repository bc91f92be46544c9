import math

import numpy as np
import pytest

from embedkit.corpus import Vocabulary
from embedkit.embed import (
    EmbConfig,
    HuffmanTree,
    cbow_loss_and_grads,
    cbow_step,
    hierarchical_softmax_loss,
    make_unigram_sampler,
    sgns_loss_and_grads,
    sgns_step,
    train_on_sentences,
)

LN2 = math.log(2.0)


def rel_err(a, n):
    a, n = np.asarray(a, dtype=float), np.asarray(n, dtype=float)
    return np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8))


def numeric_grad(fn, x, eps=1e-5):
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = fn()
        flat[i] = orig - eps
        down = fn()
        flat[i] = orig
        g[i] = (up - down) / (2 * eps)
    return grad


def _vocab(counts):
    return Vocabulary(["<pad>", "<unk>"] + [f"w{i}" for i in range(len(counts))], [0, 0] + list(counts))


# -- negative sampler ------------------------------------------------------------------


def test_sampler_two_words():
    sampler = make_unigram_sampler(_vocab([75, 25]), 0.75)
    expected = 75**0.75 / (75**0.75 + 25**0.75)
    assert sampler.probs[2] == pytest.approx(expected, abs=1e-12)
    assert sampler.probs[2] == pytest.approx(0.695, abs=5e-4)
    assert sampler.probs[:2].tolist() == [0.0, 0.0]


def test_sampler_uniform_and_linear():
    uniform = make_unigram_sampler(_vocab([7, 7, 7, 7]))
    assert np.allclose(uniform.probs[2:], 0.25, atol=1e-15)
    linear = make_unigram_sampler(_vocab([1, 2, 3, 4]), power=1.0)
    assert np.allclose(linear.probs[2:], np.array([1, 2, 3, 4]) / 10, atol=1e-15)


def test_sampler_rejects_empty_vocab():
    with pytest.raises(ValueError):
        make_unigram_sampler(_vocab([]))


def test_sampler_empirical_frequencies():
    rng = np.random.default_rng(0)
    counts = rng.integers(1, 1000, size=48)
    sampler = make_unigram_sampler(_vocab(counts))
    assert abs(sampler.probs.sum() - 1.0) < 1e-12
    draws = sampler.sample(rng, 1_000_000)
    assert draws.min() >= 2
    freq = np.bincount(draws, minlength=len(counts) + 2) / draws.size
    assert np.max(np.abs(freq - sampler.probs)) < 0.01


# -- huffman / hierarchical softmax -------------------------------------------------------


def _is_prefix_free(codes):
    strings = sorted("".join(map(str, c)) for c in codes)
    return all(not b.startswith(a) for a, b in zip(strings, strings[1:]))


@pytest.mark.parametrize("size", [2, 3, 5, 17, 64, 200])
def test_huffman_prefix_free_and_kraft(size):
    rng = np.random.default_rng(size)
    counts = [0, 0] + list(rng.integers(1, 500, size=size))
    tree = HuffmanTree.build(counts, 4)
    codes = tree.codes[2:]
    assert _is_prefix_free(codes)
    assert sum(2.0 ** -len(c) for c in codes) == 1.0
    assert tree.node_vectors.shape == (size - 1, 4)
    for w in range(2, size + 2):
        for v in range(2, size + 2):
            if counts[w] > counts[v]:
                assert len(tree.codes[w]) <= len(tree.codes[v])


def test_huffman_most_frequent_has_shortest_code():
    tree = HuffmanTree.build([0, 0, 9, 5, 2, 1], 3)
    lengths = [len(c) for c in tree.codes[2:]]
    assert lengths[0] == min(lengths)
    assert lengths == [1, 2, 3, 3]


def test_hs_two_words_zero_vectors():
    tree = HuffmanTree.build([0, 0, 3, 2], 5)
    assert tree.node_vectors.shape == (1, 5)
    loss, grad = hierarchical_softmax_loss(np.zeros(5), 2, tree, 0.1)
    assert loss == pytest.approx(LN2, abs=1e-15)


def test_hs_probabilities_sum_to_one():
    rng = np.random.default_rng(3)
    counts = [0, 0] + list(rng.integers(1, 100, size=20))
    tree = HuffmanTree.build(counts, 6)
    tree.node_vectors[:] = rng.normal(size=tree.node_vectors.shape)
    h = rng.normal(size=6)
    total = sum(tree.probability(h, w) for w in range(2, 22))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_hs_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    tree = HuffmanTree.build([0, 0] + list(rng.integers(1, 50, size=9)), 5)
    tree.node_vectors[:] = rng.normal(size=tree.node_vectors.shape)
    h = rng.normal(size=5)
    target = 6
    nodes = tree.node_vectors.copy()

    def loss():
        return -math.log(tree.probability(h, target))

    num_h = numeric_grad(loss, h)
    num_nodes = numeric_grad(loss, tree.node_vectors)
    value, grad_h = hierarchical_softmax_loss(h, target, tree, lr=1.0)
    assert value == pytest.approx(loss_value_from(nodes, tree, h, target), rel=1e-12)
    assert rel_err(grad_h, num_h) < 1e-6
    # with lr=1 the node update equals minus the gradient
    assert rel_err(nodes - tree.node_vectors, num_nodes) < 1e-6


def loss_value_from(nodes, tree, h, target):
    saved = tree.node_vectors.copy()
    tree.node_vectors[:] = nodes
    value = -math.log(tree.probability(h, target))
    tree.node_vectors[:] = saved
    return value


# -- negative-sampling steps -----------------------------------------------------------


@pytest.mark.parametrize("k", [1, 5, 10])
def test_sgns_zero_vectors(k):
    d = 7
    loss, dv, du_pos, du_neg = sgns_loss_and_grads(np.zeros(d), np.zeros(d), np.zeros((k, d)))
    assert abs(loss - (k + 1) * LN2) < 1e-12
    assert np.all(dv == 0)
    assert abs(sgns_step(np.zeros(d), np.zeros(d), np.zeros((k, d)), 0.1) - (k + 1) * LN2) < 1e-12


def test_sgns_saturation():
    v = np.zeros(4)
    v[0] = 20.0
    u = np.zeros(4)
    u[0] = 1.0
    loss = sgns_step(v, u, np.zeros((0, 4)), 0.0)
    assert loss < 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_sgns_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    d, k = 6, 4
    v, u, neg = rng.normal(size=d), rng.normal(size=d), rng.normal(size=(k, d))

    def f():
        return sgns_loss_and_grads(v, u, neg)[0]

    _, dv, du, dneg = sgns_loss_and_grads(v, u, neg)
    assert rel_err(dv, numeric_grad(f, v)) < 1e-6
    assert rel_err(du, numeric_grad(f, u)) < 1e-6
    assert rel_err(dneg, numeric_grad(f, neg)) < 1e-6


def test_sgns_step_applies_scaled_gradients():
    rng = np.random.default_rng(9)
    v, u, neg = rng.normal(size=3), rng.normal(size=3), rng.normal(size=(2, 3))
    _, dv, du, dneg = sgns_loss_and_grads(v, u, neg)
    v0, u0, n0 = v.copy(), u.copy(), neg.copy()
    sgns_step(v, u, neg, 0.1)
    assert np.allclose(v, v0 - 0.1 * dv) and np.allclose(u, u0 - 0.1 * du) and np.allclose(neg, n0 - 0.1 * dneg)


@pytest.mark.parametrize("k", [1, 5, 10])
def test_cbow_zero_vectors(k):
    loss, dctx, _, _ = cbow_loss_and_grads(np.zeros((3, 5)), np.zeros(5), np.zeros((k, 5)))
    assert abs(loss - (k + 1) * LN2) < 1e-12
    assert np.all(dctx == 0)


def test_cbow_single_context_equals_sgns():
    rng = np.random.default_rng(1)
    vocab = _vocab([5, 4, 3, 2, 1, 1])
    sampler = make_unigram_sampler(vocab)
    out_a = rng.normal(size=(8, 4))
    out_b = out_a.copy()
    ctx = rng.normal(size=(1, 4))
    v = ctx[0].copy()

    loss_a = cbow_step(ctx, 3, sampler, out_a, 0.05, np.random.default_rng(7), negatives=3)
    negs = sampler.sample(np.random.default_rng(7), 3)
    neg_vecs = out_b[negs].copy()
    pos_vec = out_b[3].copy()
    loss_b = sgns_step(v, pos_vec, neg_vecs, 0.05)
    assert loss_a == pytest.approx(loss_b, abs=1e-14)
    assert np.allclose(ctx[0], v, atol=1e-15)
    assert np.allclose(out_a[3], pos_vec, atol=1e-15)


def test_cbow_empty_context_is_noop():
    out = np.ones((4, 3))
    assert cbow_step(np.zeros((0, 3)), 2, make_unigram_sampler(_vocab([1, 1])), out, 0.1, np.random.default_rng()) == 0.0
    assert np.all(out == 1)


@pytest.mark.parametrize("seed", range(5))
def test_cbow_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    ctx, u, neg = rng.normal(size=(3, 5)), rng.normal(size=5), rng.normal(size=(4, 5))

    def f():
        return cbow_loss_and_grads(ctx, u, neg)[0]

    _, dctx, du, dneg = cbow_loss_and_grads(ctx, u, neg)
    num_ctx = numeric_grad(f, ctx)
    for row in num_ctx:
        assert rel_err(dctx, row) < 1e-6
    assert rel_err(du, numeric_grad(f, u)) < 1e-6
    assert rel_err(dneg, numeric_grad(f, neg)) < 1e-6


# -- training loop -----------------------------------------------------------------------


def _toy_sentences(n=200):
    rng = np.random.default_rng(0)
    a = [f"a{i}" for i in range(8)]
    b = [f"b{i}" for i in range(8)]
    return [list(rng.choice(a if i % 2 else b, size=6)) for i in range(n)]


@pytest.mark.parametrize("algorithm", ["w2v-sg", "w2v-cb", "ft-sg", "ft-cb", "glove"])
@pytest.mark.parametrize("objective", ["negative-sampling", "hierarchical-softmax"])
def test_training_is_deterministic_and_keeps_pad_zero(algorithm, objective):
    if algorithm == "glove" and objective == "hierarchical-softmax":
        pytest.skip("objective does not apply to glove")
    cfg = dict(algorithm=algorithm, dim=8, min_count=2, epochs=2, bucket_count=5000, objective=objective, seed=3)
    first = train_on_sentences(_toy_sentences(), EmbConfig(**cfg))
    second = train_on_sentences(_toy_sentences(), EmbConfig(**cfg))
    assert np.array_equal(first.vectors, second.vectors)
    assert np.all(first.vectors[0] == 0)
    assert np.all(np.isfinite(first.vectors))
    assert first.vectors.shape == (len(first.vocab), 8)


def test_config_defaults():
    cfg = EmbConfig()
    assert (cfg.dim, cfg.window, cfg.min_count, cfg.negatives) == (300, 5, 5, 5)
    assert cfg.subsample_t == 1e-4 and cfg.objective == "negative-sampling"
    assert EmbConfig(algorithm="glove").epochs == 15
    assert EmbConfig(algorithm="w2v-sg").learning_rate == 0.025
    assert EmbConfig(algorithm="ft-cb").learning_rate == 0.05


@pytest.mark.parametrize(
    "kwargs",
    [dict(algorithm="bert"), dict(dim=0), dict(window=0), dict(ngram_min=5, ngram_max=3), dict(bucket_count=0)],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        EmbConfig(**kwargs)


def test_empty_effective_corpus_rejected():
    with pytest.raises(ValueError, match="empty effective corpus"):
        train_on_sentences([["a", "b"]], EmbConfig(min_count=5, dim=4))


def test_hogwild_workers_train():
    model = train_on_sentences(_toy_sentences(), EmbConfig(dim=8, min_count=2, epochs=2, workers=3))
    assert np.all(np.isfinite(model.vectors))
    assert np.all(model.vectors[0] == 0)
