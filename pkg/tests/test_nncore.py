import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embedkit.nncore import (
    Activation,
    AdamState,
    Conv1D,
    Dense,
    Dropout,
    Embedding,
    LayerGraph,
    MaxPool,
    Recurrent,
    activation,
    adam_step,
    bidirectional,
    conv1d,
    dense,
    dropout,
    fused_gradient,
    grad_check,
    gru_cell,
    init_cell_params,
    loss,
    lstm_cell,
    max_pool,
    max_pool_backward,
    pool_rows,
    softmax,
)


def zero_params(cell, d, h):
    g = 4 if cell == "lstm" else 3
    return {"W": np.zeros((g * h, d)), "U": np.zeros((g * h, h)), "b": np.zeros(g * h)}


def randomize(graph, rng, scale=0.5):
    # nonzero biases keep relu away from its kink on all-padding windows
    for key, p in graph.parameters().items():
        if not key.startswith("0."):
            p[...] = rng.normal(0.0, scale, p.shape)


def batch(rng, vocab=12, steps=8, size=6, lengths=None):
    lengths = np.array(lengths if lengths is not None else rng.integers(1, steps + 1, size))
    ids = rng.integers(2, vocab, (len(lengths), steps))
    for b, n in enumerate(lengths):
        ids[b, n:] = 0
    return ids, lengths


def embedding(rng, vocab=12, dim=8):
    w = rng.uniform(-0.5, 0.5, (vocab, dim))
    w[0] = 0
    return Embedding(w)


# -- convolution / dense / activations -------------------------------------------------


def test_conv1d_hand_example():
    out, _ = conv1d(np.array([[1.0], [2.0], [4.0]]), np.array([[[1.0], [-1.0]]]), np.zeros(1))
    assert out[:, 0].tolist() == [-1.0, -2.0]


def test_conv1d_zero_input_gives_bias():
    out, _ = conv1d(np.zeros((5, 3)), np.ones((4, 2, 3)), np.arange(4.0))
    assert np.array_equal(out, np.tile(np.arange(4.0), (4, 1)))


@given(st.integers(1, 10), st.integers(1, 5), st.integers(1, 4), st.integers(1, 5))
def test_conv1d_shape_law(s, k, d, f):
    x = np.ones((s, d))
    if s < k:
        with pytest.raises(ValueError, match=f"{s}.*{k}"):
            conv1d(x, np.ones((f, k, d)), np.zeros(f))
    else:
        assert conv1d(x, np.ones((f, k, d)), np.zeros(f))[0].shape == (s - k + 1, f)


def test_conv1d_matches_definition():
    rng = np.random.default_rng(0)
    x, w, b = rng.normal(size=(7, 3)), rng.normal(size=(4, 2, 3)), rng.normal(size=4)
    out, _ = conv1d(x, w, b)
    for t in range(6):
        for f in range(4):
            assert out[t, f] == pytest.approx(b[f] + sum(x[t + k, d] * w[f, k, d] for k in range(2) for d in range(3)))


def test_dense_examples():
    assert dense(np.array([2.0, 3.0]), np.array([[1.0, 1.0], [1.0, -1.0]]), np.array([0.0, 1.0])).tolist() == [5.0, 0.0]
    x = np.array([0.3, -2.0, 7.0])
    assert np.array_equal(dense(x, np.eye(3), np.zeros(3)), x)
    with pytest.raises(ValueError):
        dense(x, np.eye(2), np.zeros(2))


def test_activation_examples():
    assert activation("relu", -1.0) == 0 and activation("relu", 2.0) == 2
    assert activation("sigmoid", 0.0) == 0.5
    assert activation("softmax", np.zeros(2)).tolist() == [0.5, 0.5]
    with pytest.raises(ValueError):
        activation("gelu", 1.0)


@settings(max_examples=50)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20))
def test_softmax_normalized_and_activations_finite(values):
    x = np.array(values)
    assert abs(softmax(x).sum() - 1.0) <= 1e-12
    for kind in ("relu", "sigmoid", "tanh", "softmax"):
        assert np.all(np.isfinite(activation(kind, x)))


# -- pooling ---------------------------------------------------------------------------


def test_global_max_pool_example():
    out, _ = max_pool(np.array([[[1.0, 5.0], [3.0, 2.0]]]))
    assert out.tolist() == [[3.0, 5.0]]


def test_local_full_width_equals_global():
    x = np.random.default_rng(1).normal(size=(2, 6, 3))
    local, _ = max_pool(x, "local", 6, 6)
    glob, _ = max_pool(x)
    assert np.array_equal(local[:, 0], glob)


def test_constant_input_routes_to_first_row():
    x = np.ones((1, 4, 3))
    _, arg = max_pool(x)
    dx = max_pool_backward(np.ones((1, 3)), arg, x.shape)
    assert np.array_equal(dx[0, 0], np.ones(3)) and np.all(dx[0, 1:] == 0)


def test_pool_rows_formula_and_width_error():
    assert pool_rows(63, 2, 2) == 32
    assert pool_rows(7, 2, 2) == 4
    with pytest.raises(ValueError):
        max_pool(np.ones((1, 3, 2)), "local", 4, 1)


@pytest.mark.parametrize("seed", range(5))
def test_local_pool_matches_windows_and_conserves_gradient(seed):
    rng = np.random.default_rng(seed)
    steps, width, stride = int(rng.integers(3, 12)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
    x = rng.normal(size=(3, steps, 2))
    out, arg = max_pool(x, "local", width, stride)
    assert out.shape[1] == math.ceil((steps - width) / stride) + 1
    for r in range(out.shape[1]):
        window = x[:, r * stride:r * stride + width]
        assert np.array_equal(out[:, r], window.max(axis=1))
    dy = rng.normal(size=out.shape)
    dx = max_pool_backward(dy, arg, x.shape)
    assert dx.sum() == pytest.approx(dy.sum())


def test_pool_ignores_padding():
    x = np.array([[[1.0], [2.0], [9.0], [9.0]]])
    out, _ = max_pool(x, lengths=np.array([2]))
    assert out.tolist() == [[2.0]]


# -- dropout ---------------------------------------------------------------------------


def test_dropout_identity_cases():
    x = np.random.default_rng(0).normal(size=100)
    assert np.array_equal(dropout(x, 0.0, "train"), x)
    assert np.array_equal(dropout(x, 0.0, "eval"), x)
    assert np.array_equal(dropout(x, 0.5, "eval"), x)
    with pytest.raises(ValueError):
        dropout(x, 1.0, "train")
    with pytest.raises(ValueError):
        Dropout(-0.1)


def test_dropout_statistics():
    rng = np.random.default_rng(3)
    x = rng.uniform(1.0, 2.0, size=100_000)
    y = dropout(x, 0.5, "train", rng)
    assert abs(np.mean(y != 0) - 0.5) <= 0.01
    assert abs(y.mean() / x.mean() - 1.0) <= 0.02


def test_dropout_eval_leaves_rng_untouched():
    layer = Dropout(0.5, seed=4)
    before = layer.rng.bit_generator.state
    layer.forward(np.ones((3, 4)), None, train=False)
    assert layer.rng.bit_generator.state == before


# -- recurrent cells -------------------------------------------------------------------


def test_lstm_zero_params():
    h, c = lstm_cell(np.ones(3), np.zeros(2), np.zeros(2), zero_params("lstm", 3, 2))
    assert np.all(h == 0) and np.all(c == 0)
    c0 = np.array([1.5, -4.0])
    h, c = lstm_cell(np.ones(3), np.ones(2), c0, zero_params("lstm", 3, 2))
    assert np.allclose(c, 0.5 * c0, atol=1e-15)
    assert np.allclose(h, 0.5 * np.tanh(0.5 * c0), atol=1e-15)


def test_gru_zero_params():
    h0 = np.array([0.4, -2.0])
    assert np.allclose(gru_cell(np.ones(3), h0, zero_params("gru", 3, 2)), 0.5 * h0, atol=1e-15)
    assert np.all(gru_cell(np.ones(3), np.zeros(2), zero_params("gru", 3, 2)) == 0)


def test_cell_shape_mismatch():
    with pytest.raises(ValueError):
        lstm_cell(np.ones(4), np.zeros(2), np.zeros(2), zero_params("lstm", 3, 2))
    with pytest.raises(ValueError):
        gru_cell(np.ones(3), np.zeros(5), zero_params("gru", 3, 2))


@pytest.mark.parametrize("cell", ["lstm", "gru"])
def test_unrolled_layer_matches_chained_cells(cell):
    rng = np.random.default_rng(2)
    params = init_cell_params(rng, cell, 3, 4)
    seq = rng.normal(size=(5, 3))
    h, c = np.zeros(4), np.zeros(4)
    for x in seq[:3]:
        if cell == "lstm":
            h, c = lstm_cell(x, h, c, params)
        else:
            h = gru_cell(x, h, params)
    out, _ = Recurrent(cell, params).forward(seq[None], np.array([3]), train=False)
    assert np.allclose(out[0], h, atol=1e-14)


@pytest.mark.parametrize("cell", ["lstm", "gru"])
def test_palindrome_with_shared_params(cell):
    rng = np.random.default_rng(5)
    params = init_cell_params(rng, cell, 3, 4)
    half = rng.normal(size=(3, 3))
    seq = np.concatenate([half, half[::-1]])
    fwd, bwd = bidirectional(cell, seq, params, params)
    assert np.allclose(fwd, bwd, atol=1e-14)


def test_bidirectional_respects_true_length_and_single_step():
    rng = np.random.default_rng(6)
    p_f, p_b = init_cell_params(rng, "lstm", 3, 2), init_cell_params(rng, "lstm", 3, 2)
    seq = rng.normal(size=(5, 3))
    padded = seq.copy()
    padded[2:] = 100.0
    assert np.allclose(np.concatenate(bidirectional("lstm", seq, p_f, p_b, 2)),
                       np.concatenate(bidirectional("lstm", padded, p_f, p_b, 2)))
    fwd, bwd = bidirectional("lstm", seq[:1], p_f, p_b)
    assert np.allclose(fwd, lstm_cell(seq[0], np.zeros(2), np.zeros(2), p_f)[0])
    assert np.allclose(bwd, lstm_cell(seq[0], np.zeros(2), np.zeros(2), p_b)[0])
    with pytest.raises(ValueError):
        bidirectional("lstm", np.zeros((0, 3)), p_f, p_b)


# -- losses and optimizer --------------------------------------------------------------


def test_loss_examples():
    assert loss("categorical-cross-entropy", np.array([[0.5, 0.5]]), [1]) == pytest.approx(math.log(2), abs=1e-15)
    assert loss("categorical-cross-entropy", np.array([[0.0, 1.0]]), [1]) <= 1e-10
    assert loss("binary-cross-entropy", np.array([[1.0]]), [1]) <= 1e-10
    assert loss("binary-cross-entropy", np.array([[0.0]]), [1]) == pytest.approx(-math.log(1e-12))
    with pytest.raises(ValueError):
        loss("categorical-cross-entropy", np.array([[0.5, 0.5]]), [2])


@pytest.mark.parametrize("seed", range(3))
def test_fused_softmax_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    z, y = rng.normal(size=(4, 3)), rng.integers(0, 3, 4)
    grad = fused_gradient("categorical-cross-entropy", softmax(z), y)
    onehot = np.eye(3)[y]
    assert np.allclose(grad, (softmax(z) - onehot) / 4)
    eps = 1e-6
    for idx in np.ndindex(z.shape):
        zp, zm = z.copy(), z.copy()
        zp[idx] += eps
        zm[idx] -= eps
        num = (loss("categorical-cross-entropy", softmax(zp), y) - loss("categorical-cross-entropy", softmax(zm), y)) / (2 * eps)
        assert grad[idx] == pytest.approx(num, abs=1e-8)


def test_adam_first_step():
    theta = {"w": np.array([1.0])}
    adam_step(theta, {"w": np.array([0.3])}, AdamState(), lr=1e-4)
    assert theta["w"][0] - 1.0 == pytest.approx(-1e-4 * 0.3 / (0.3 + 1e-8), rel=1e-9)
    for g in (1e-3, 1.0, 1e3):
        theta = {"w": np.array([0.0])}
        adam_step(theta, {"w": np.array([g])}, AdamState(), lr=1e-4)
        assert abs(theta["w"][0]) == pytest.approx(1e-4, rel=0.01)


@settings(max_examples=30)
@given(st.integers(0, 5), st.integers(0, 2**31 - 1))
def test_adam_zero_gradient_is_identity(warm_steps, seed):
    rng = np.random.default_rng(seed)
    theta = {"w": rng.normal(size=(3, 2))}
    state = AdamState()
    for _ in range(warm_steps):
        adam_step(theta, {"w": rng.normal(size=(3, 2))}, state, 1e-3)
    before, t = theta["w"].copy(), state.t
    adam_step(theta, {"w": np.zeros((3, 2))}, state, 1e-3)
    assert np.array_equal(theta["w"], before)
    assert state.t == t + 1


def test_adam_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        adam_step({"w": np.zeros(1)}, {"w": np.array([np.nan])}, AdamState(), 1e-3)
    with pytest.raises(ValueError):
        adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState(), 1e-3)


# -- graphs and gradient checks --------------------------------------------------------


def _graph(kind, rng, n_classes=3, dim=8, hidden=4):
    head = "sigmoid" if n_classes == 2 else "softmax"
    out = 1 if n_classes == 2 else n_classes
    if kind == "dense":
        return LayerGraph([embedding(rng, dim=dim), MaxPool(), Dense.create(rng, dim, out)], head)
    if kind == "cnn":
        layers = [embedding(rng, dim=dim), Conv1D.create(rng, 6, 2, dim), Activation("relu"), Dropout(0.5),
                  MaxPool(), Dense.create(rng, 6, out)]
    elif kind == "bilstm":
        layers = [embedding(rng, dim=dim), Recurrent.create(rng, "lstm", dim, hidden, True), Dropout(0.5),
                  Dense.create(rng, 2 * hidden, out)]
    elif kind == "gru":
        layers = [embedding(rng, dim=dim), Recurrent.create(rng, "gru", dim, hidden, False), Dropout(0.5),
                  Dense.create(rng, hidden, out)]
    else:
        layers = [embedding(rng, dim=dim), Conv1D.create(rng, 6, 2, dim), Activation("relu"), Dropout(0.5),
                  MaxPool("local", 2, 2), Recurrent.create(rng, "lstm", 6, hidden, True),
                  Dense.create(rng, 2 * hidden, out)]
    return LayerGraph(layers, head)


def test_grad_check_dense_softmax():
    rng = np.random.default_rng(0)
    graph = _graph("dense", rng)
    randomize(graph, rng)
    ids, lengths = batch(rng)
    assert grad_check(graph, ids, lengths, rng.integers(0, 3, len(ids))) < 1e-6


@pytest.mark.parametrize("kind", ["cnn", "bilstm", "gru", "hybrid"])
@pytest.mark.parametrize("n_classes", [2, 3])
def test_grad_check_graphs(kind, n_classes):
    rng = np.random.default_rng(11)
    graph = _graph(kind, rng, n_classes)
    randomize(graph, rng)
    ids, lengths = batch(rng, lengths=[8, 5, 4, 1, 0, 2])
    assert grad_check(graph, ids, lengths, rng.integers(0, n_classes, len(ids))) < 1e-5


@pytest.mark.parametrize("seed", range(20))
def test_layer_backward_random_shapes(seed):
    rng = np.random.default_rng(100 + seed)
    dim, hidden, steps = int(rng.integers(2, 6)), int(rng.integers(1, 4)), int(rng.integers(4, 8))
    kind = ["cnn", "bilstm", "gru", "hybrid"][seed % 4]
    graph = _graph(kind, rng, 3, dim=dim, hidden=hidden)
    randomize(graph, rng)
    ids, lengths = batch(rng, steps=steps, size=3)
    assert grad_check(graph, ids, lengths, rng.integers(0, 3, 3)) < 1e-5


def test_grad_check_restores_graph_state():
    rng = np.random.default_rng(1)
    graph = _graph("cnn", rng)
    before = graph.snapshot()
    ids, lengths = batch(rng)
    grad_check(graph, ids, lengths, rng.integers(0, 3, len(ids)))
    assert not graph.training
    assert graph.layers[3].rate == 0.5
    for key, value in graph.parameters(trainable_only=False).items():
        assert value.dtype == np.float64 and np.array_equal(value, before[key])


def test_eval_forward_deterministic():
    rng = np.random.default_rng(2)
    graph = _graph("bilstm", rng).eval()
    ids, lengths = batch(rng)
    assert np.array_equal(graph.forward(ids, lengths), graph.forward(ids, lengths))


def test_embedding_pad_gradient_masked():
    rng = np.random.default_rng(3)
    graph = _graph("cnn", rng).train()
    ids, lengths = batch(rng, lengths=[2, 8, 1])
    graph.loss_and_backward(ids, lengths, [0, 1, 2])
    assert np.all(graph.layers[0].grads["weight"][0] == 0)


@pytest.mark.parametrize("kind", ["cnn", "bilstm", "gru", "hybrid"])
def test_checkpoint_round_trip(tmp_path, kind):
    rng = np.random.default_rng(4)
    graph = _graph(kind, rng, 2)
    graph.metadata["note"] = "x"
    path = tmp_path / "model.npz"
    graph.save(path)
    loaded = LayerGraph.load(path)
    assert loaded.spec() == graph.spec()
    for key, value in graph.parameters(trainable_only=False).items():
        assert np.array_equal(loaded.parameters(trainable_only=False)[key], value)
    ids, lengths = batch(rng)
    assert np.array_equal(loaded.eval().forward(ids, lengths), graph.eval().forward(ids, lengths))


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.npz"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        LayerGraph.load(path)
