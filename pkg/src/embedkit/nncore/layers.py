"""Feed-forward layers with paired forward/backward passes.

Every layer maps ``(x, lengths) -> (y, lengths)`` where ``lengths`` holds the
number of valid (non-padding) positions per example, or None once the time
axis is gone. Batches are the leading axis.
"""

from __future__ import annotations

import math

import numpy as np

from ..corpus import PAD_ID


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    kind = "layer"
    trainable = True

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def config(self) -> dict:
        return {"kind": self.kind}

    def forward(self, x, lengths, train: bool):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grads(self) -> None:
        self.grads = {name: np.zeros_like(p) for name, p in self.params.items()}


# -- functional forms ------------------------------------------------------------------


def conv1d(x: np.ndarray, filters: np.ndarray, bias: np.ndarray):
    """Valid 1-D convolution over the time axis.

    ``x`` is (..., S, D) and ``filters`` (F, K, D); the result is
    (..., S - K + 1, F). Returns the output and the unfolded input for backward.
    """
    n_filters, width, dim = filters.shape
    steps = x.shape[-2]
    if steps < width:
        raise ValueError(f"sequence length {steps} is shorter than kernel size {width}")
    if x.shape[-1] != dim:
        raise ValueError(f"input dim {x.shape[-1]} does not match filter dim {dim}")
    out_steps = steps - width + 1
    cols = np.concatenate([x[..., k:k + out_steps, :] for k in range(width)], axis=-1)
    kernel = filters.transpose(1, 2, 0).reshape(width * dim, n_filters)
    return cols @ kernel + bias, cols


def conv1d_backward(dy: np.ndarray, cols: np.ndarray, filters: np.ndarray, input_shape):
    n_filters, width, dim = filters.shape
    out_steps = dy.shape[-2]
    kernel = filters.transpose(1, 2, 0).reshape(width * dim, n_filters)
    flat_cols = cols.reshape(-1, width * dim)
    flat_dy = dy.reshape(-1, n_filters)
    d_kernel = flat_cols.T @ flat_dy
    d_filters = d_kernel.reshape(width, dim, n_filters).transpose(2, 0, 1)
    d_bias = flat_dy.sum(axis=0)
    d_cols = dy @ kernel.T
    dx = np.zeros(input_shape)
    for k in range(width):
        dx[..., k:k + out_steps, :] += d_cols[..., k * dim:(k + 1) * dim]
    return dx, d_filters, d_bias


def dense(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if x.shape[-1] != weights.shape[1] or bias.shape != (weights.shape[0],):
        raise ValueError(f"shape mismatch: input {x.shape}, weights {weights.shape}, bias {bias.shape}")
    return x @ weights.T + bias


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),
    "sigmoid": sigmoid,
    "tanh": np.tanh,
    "softmax": softmax,
}


def activation(kind: str, x):
    if kind not in ACTIVATIONS:
        raise ValueError(f"unknown activation {kind!r}")
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float64)
    return ACTIVATIONS[kind](x)


def activation_backward(kind: str, x: np.ndarray, y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return dy * (x > 0)
    if kind == "sigmoid":
        return dy * y * (1.0 - y)
    if kind == "tanh":
        return dy * (1.0 - y * y)
    if kind == "softmax":
        return y * (dy - np.sum(dy * y, axis=-1, keepdims=True))
    raise ValueError(f"unknown activation {kind!r}")


def pool_rows(steps: int, width: int, stride: int) -> int:
    return math.ceil((steps - width) / stride) + 1


def max_pool(x: np.ndarray, mode: str = "global", width: int | None = None, stride: int | None = None,
             lengths: np.ndarray | None = None):
    """Max pooling over the time axis of a (B, T, F) batch.

    Positions at or beyond ``lengths`` are excluded. Global mode gives (B, F);
    local mode gives (B, R, F) with R = ceil((T - width) / stride) + 1, the
    last window possibly partial. Returns the output and the argmax indices
    (first occurrence on ties).
    """
    batch, steps, feats = x.shape
    if steps < 1:
        raise ValueError("max_pool needs at least one time step")
    if lengths is None:
        lengths = np.full(batch, steps)
    valid = np.arange(steps)[None, :] < np.maximum(lengths, 1)[:, None]
    masked = np.where(valid[:, :, None], x, -np.inf)
    if mode == "global":
        arg = np.argmax(masked, axis=1)
        out = np.take_along_axis(x, arg[:, None, :], axis=1)[:, 0, :]
        return out, arg
    if mode != "local":
        raise ValueError(f"unknown pooling mode {mode!r}")
    if width is None or stride is None or width < 1 or stride < 1:
        raise ValueError("local pooling needs positive width and stride")
    if width > steps:
        raise ValueError(f"pool width {width} exceeds sequence length {steps}")
    rows = pool_rows(steps, width, stride)
    starts = np.arange(rows) * stride
    positions = starts[:, None] + np.arange(width)[None, :]
    in_range = positions < steps
    positions = np.minimum(positions, steps - 1)
    windows = masked[:, positions, :]
    windows = np.where(in_range[None, :, :, None], windows, -np.inf)
    local_arg = np.argmax(windows, axis=2)
    arg = np.take_along_axis(np.broadcast_to(positions[None, :, :, None], windows.shape), local_arg[:, :, None, :], axis=2)[:, :, 0, :]
    out = np.take_along_axis(x, arg, axis=1)
    # windows that start past the valid length carry no information
    row_valid = starts[None, :] < np.maximum(lengths, 1)[:, None]
    out = np.where(row_valid[:, :, None], out, 0.0)
    return out, arg


def max_pool_backward(dy: np.ndarray, arg: np.ndarray, input_shape, row_valid: np.ndarray | None = None):
    dx = np.zeros(input_shape)
    batch, _, feats = input_shape
    if dy.ndim == 2:
        b_idx, f_idx = np.meshgrid(np.arange(batch), np.arange(feats), indexing="ij")
        np.add.at(dx, (b_idx, arg, f_idx), dy)
        return dx
    if row_valid is not None:
        dy = dy * row_valid[:, :, None]
    rows = dy.shape[1]
    b_idx = np.broadcast_to(np.arange(batch)[:, None, None], (batch, rows, feats))
    f_idx = np.broadcast_to(np.arange(feats)[None, None, :], (batch, rows, feats))
    np.add.at(dx, (b_idx, arg, f_idx), dy)
    return dx


# -- layer classes ---------------------------------------------------------------------


class Embedding(Layer):
    kind = "embedding"

    def __init__(self, weights: np.ndarray, trainable: bool = True):
        super().__init__()
        self.params["weight"] = weights
        self.trainable = trainable
        self._ids = None

    def config(self):
        return {"kind": self.kind, "vocab_size": self.params["weight"].shape[0],
                "dim": self.params["weight"].shape[1], "trainable": self.trainable}

    def forward(self, ids, lengths, train):
        self._ids = ids
        return self.params["weight"][ids], lengths

    def backward(self, dy):
        grad = np.zeros_like(self.params["weight"])
        np.add.at(grad, self._ids, dy)
        grad[PAD_ID] = 0.0
        self.grads["weight"] = grad
        return None


class Conv1D(Layer):
    kind = "conv1d"

    def __init__(self, filters: np.ndarray, bias: np.ndarray):
        super().__init__()
        self.params["filters"] = filters
        self.params["bias"] = bias

    @classmethod
    def create(cls, rng, n_filters: int, width: int, dim: int) -> "Conv1D":
        filters = glorot_uniform(rng, (n_filters, width, dim), width * dim, width * n_filters)
        return cls(filters, np.zeros(n_filters))

    @property
    def width(self) -> int:
        return self.params["filters"].shape[1]

    def config(self):
        f, k, d = self.params["filters"].shape
        return {"kind": self.kind, "n_filters": f, "width": k, "dim": d}

    def forward(self, x, lengths, train):
        y, self._cols = conv1d(x, self.params["filters"], self.params["bias"])
        self._shape = x.shape
        if lengths is not None:
            lengths = np.clip(lengths - self.width + 1, 1, y.shape[1])
        return y, lengths

    def backward(self, dy):
        dx, df, db = conv1d_backward(dy, self._cols, self.params["filters"], self._shape)
        self.grads["filters"] = df
        self.grads["bias"] = db
        return dx


class Activation(Layer):
    kind = "activation"
    trainable = False

    def __init__(self, fn: str):
        super().__init__()
        if fn not in ACTIVATIONS:
            raise ValueError(f"unknown activation {fn!r}")
        self.fn = fn

    def config(self):
        return {"kind": self.kind, "fn": self.fn}

    def forward(self, x, lengths, train):
        self._x = x
        self._y = activation(self.fn, x)
        return self._y, lengths

    def backward(self, dy):
        return activation_backward(self.fn, self._x, self._y, dy)


class Dropout(Layer):
    """Inverted dropout; the identity in eval mode."""

    kind = "dropout"
    trainable = False

    def __init__(self, rate: float = 0.5, seed: int = 0):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self._mask = None

    def config(self):
        return {"kind": self.kind, "rate": self.rate, "seed": self.seed}

    def forward(self, x, lengths, train):
        if not train or self.rate == 0.0:
            self._mask = None
            return x, lengths
        self._mask = (self.rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask, lengths

    def backward(self, dy):
        return dy if self._mask is None else dy * self._mask


def dropout(x: np.ndarray, rate: float, mode: str, rng: np.random.Generator | None = None) -> np.ndarray:
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return x
    rng = rng if rng is not None else np.random.default_rng()
    return x * ((rng.random(x.shape) >= rate) / (1.0 - rate))


class MaxPool(Layer):
    kind = "maxpool"
    trainable = False

    def __init__(self, mode: str = "global", width: int | None = None, stride: int | None = None):
        super().__init__()
        self.mode, self.width, self.stride = mode, width, stride

    def config(self):
        return {"kind": self.kind, "mode": self.mode, "width": self.width, "stride": self.stride}

    def forward(self, x, lengths, train):
        self._shape = x.shape
        y, self._arg = max_pool(x, self.mode, self.width, self.stride, lengths)
        if self.mode == "global":
            self._row_valid = None
            return y, None
        steps = x.shape[1]
        lengths = np.full(x.shape[0], steps) if lengths is None else np.maximum(lengths, 1)
        starts = np.arange(y.shape[1]) * self.stride
        self._row_valid = starts[None, :] < lengths[:, None]
        return y, self._row_valid.sum(axis=1)

    def backward(self, dy):
        return max_pool_backward(dy, self._arg, self._shape, self._row_valid)


class Dense(Layer):
    kind = "dense"

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        super().__init__()
        self.params["weight"] = weights
        self.params["bias"] = bias

    @classmethod
    def create(cls, rng, in_dim: int, out_dim: int) -> "Dense":
        return cls(glorot_uniform(rng, (out_dim, in_dim), in_dim, out_dim), np.zeros(out_dim))

    def config(self):
        c, d = self.params["weight"].shape
        return {"kind": self.kind, "in_dim": d, "out_dim": c}

    def forward(self, x, lengths, train):
        self._x = x
        return dense(x, self.params["weight"], self.params["bias"]), None

    def backward(self, dy):
        self.grads["weight"] = dy.T @ self._x
        self.grads["bias"] = dy.sum(axis=0)
        return dy @ self.params["weight"]
