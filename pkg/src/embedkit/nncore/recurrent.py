"""LSTM and GRU cells, unrolled with masking, and their bidirectional wrapper.

Gate parameters are packed row-wise: LSTM rows are [input, forget, output,
candidate], GRU rows are [update, reset, candidate], each block H rows tall.
Input weights are (G*H, D), recurrent weights (G*H, H), bias (G*H,).
"""

from __future__ import annotations

import numpy as np

from .layers import Layer, glorot_uniform, sigmoid

GATES = {"lstm": 4, "gru": 3}


def _check(params: dict, cell: str, in_dim: int, hidden: int) -> None:
    g = GATES[cell]
    expected = {"W": (g * hidden, in_dim), "U": (g * hidden, hidden), "b": (g * hidden,)}
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ValueError(f"{cell} parameter {name} has shape {params[name].shape}, expected {shape}")


def lstm_cell(x, h, c, params):
    """One LSTM step; works on single vectors or batches."""
    hidden = h.shape[-1]
    _check(params, "lstm", x.shape[-1], hidden)
    a = x @ params["W"].T + h @ params["U"].T + params["b"]
    i = sigmoid(a[..., :hidden])
    f = sigmoid(a[..., hidden:2 * hidden])
    o = sigmoid(a[..., 2 * hidden:3 * hidden])
    g = np.tanh(a[..., 3 * hidden:])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def gru_cell(x, h, params):
    """One GRU step with the reset gate applied before the recurrent product."""
    hidden = h.shape[-1]
    _check(params, "gru", x.shape[-1], hidden)
    W, U, b = params["W"], params["U"], params["b"]
    xw = x @ W.T + b
    z = sigmoid(xw[..., :hidden] + h @ U[:hidden].T)
    r = sigmoid(xw[..., hidden:2 * hidden] + h @ U[hidden:2 * hidden].T)
    n = np.tanh(xw[..., 2 * hidden:] + (r * h) @ U[2 * hidden:].T)
    return (1.0 - z) * h + z * n


def init_cell_params(rng: np.random.Generator, cell: str, in_dim: int, hidden: int) -> dict:
    """Glorot input weights, orthogonal recurrent blocks, zero bias (LSTM forget bias 1)."""
    g = GATES[cell]
    W = glorot_uniform(rng, (g * hidden, in_dim), in_dim, g * hidden)
    blocks = []
    for _ in range(g):
        q, r = np.linalg.qr(rng.normal(size=(hidden, hidden)))
        blocks.append(q * np.sign(np.diag(r)))
    U = np.concatenate(blocks, axis=0)
    b = np.zeros(g * hidden)
    if cell == "lstm":
        b[hidden:2 * hidden] = 1.0
    return {"W": W, "U": U, "b": b}


def reverse_within_length(lengths: np.ndarray, steps: int) -> np.ndarray:
    """Per-example time permutation reversing the first ``length`` positions."""
    t = np.arange(steps)[None, :]
    lengths = lengths[:, None]
    return np.where(t < lengths, lengths - 1 - t, t)


class _Direction:
    """Unrolls one cell over a (B, S, D) batch, keeping caches for BPTT."""

    def __init__(self, cell: str, params: dict):
        self.cell = cell
        self.params = params

    def forward(self, x: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        batch, steps, _ = x.shape
        hidden = self.params["U"].shape[1]
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        xw = x @ W.T + b
        h = np.zeros((batch, hidden))
        c = np.zeros((batch, hidden))
        self.x = x
        self.cache = []
        for t in range(steps):
            active = (t < lengths)[:, None]
            if self.cell == "lstm":
                a = xw[:, t] + h @ U.T
                i = sigmoid(a[:, :hidden])
                f = sigmoid(a[:, hidden:2 * hidden])
                o = sigmoid(a[:, 2 * hidden:3 * hidden])
                g = np.tanh(a[:, 3 * hidden:])
                c_new = f * c + i * g
                tc = np.tanh(c_new)
                h_new = o * tc
                self.cache.append((active, h, c, i, f, o, g, tc))
                c = np.where(active, c_new, c)
            else:
                z = sigmoid(xw[:, t, :hidden] + h @ U[:hidden].T)
                r = sigmoid(xw[:, t, hidden:2 * hidden] + h @ U[hidden:2 * hidden].T)
                n = np.tanh(xw[:, t, 2 * hidden:] + (r * h) @ U[2 * hidden:].T)
                h_new = (1.0 - z) * h + z * n
                self.cache.append((active, h, z, r, n))
            h = np.where(active, h_new, h)
        return h

    def backward(self, dh: np.ndarray) -> tuple[np.ndarray, dict]:
        W, U = self.params["W"], self.params["U"]
        hidden = U.shape[1]
        x = self.x
        steps = x.shape[1]
        da_all = np.zeros((x.shape[0], steps, W.shape[0]))
        dU = np.zeros_like(U)
        dc = np.zeros_like(dh)
        for t in reversed(range(steps)):
            if self.cell == "lstm":
                active, h_prev, c_prev, i, f, o, g, tc = self.cache[t]
                do = dh * tc
                dc_t = dc + dh * o * (1.0 - tc * tc)
                da = np.concatenate([
                    dc_t * g * i * (1.0 - i),
                    dc_t * c_prev * f * (1.0 - f),
                    do * o * (1.0 - o),
                    dc_t * i * (1.0 - g * g),
                ], axis=1) * active
                dU += da.T @ h_prev
                dh = np.where(active, da @ U, dh)
                dc = np.where(active, dc_t * f, dc)
            else:
                active, h_prev, z, r, n = self.cache[t]
                dn = dh * z
                da_n = dn * (1.0 - n * n) * active
                drh = da_n @ U[2 * hidden:]
                da_z = dh * (n - h_prev) * z * (1.0 - z) * active
                da_r = drh * h_prev * r * (1.0 - r) * active
                dU[:hidden] += da_z.T @ h_prev
                dU[hidden:2 * hidden] += da_r.T @ h_prev
                dU[2 * hidden:] += da_n.T @ (r * h_prev)
                dh_prev = dh * (1.0 - z) + drh * r + da_z @ U[:hidden] + da_r @ U[hidden:2 * hidden]
                dh = np.where(active, dh_prev, dh)
                da = np.concatenate([da_z, da_r, da_n], axis=1)
            da_all[:, t] = da
        grads = {
            "W": np.einsum("bsg,bsd->gd", da_all, x),
            "U": dU,
            "b": da_all.sum(axis=(0, 1)),
        }
        dx = da_all @ W
        return dx, grads


class Recurrent(Layer):
    """Uni- or bidirectional LSTM/GRU returning final hidden states.

    Bidirectional output is [forward final, backward final] concatenated. The
    backward direction reads each example's valid positions in reverse, so
    padding never enters either direction.
    """

    kind = "recurrent"

    def __init__(self, cell: str, params: dict, params_bwd: dict | None = None):
        super().__init__()
        if cell not in GATES:
            raise ValueError(f"unknown cell {cell!r}")
        self.cell = cell
        self.bidirectional = params_bwd is not None
        for name, value in params.items():
            self.params[f"fwd_{name}"] = value
        if params_bwd is not None:
            for name, value in params_bwd.items():
                self.params[f"bwd_{name}"] = value

    @classmethod
    def create(cls, rng, cell: str, in_dim: int, hidden: int, bidirectional: bool) -> "Recurrent":
        fwd = init_cell_params(rng, cell, in_dim, hidden)
        bwd = init_cell_params(rng, cell, in_dim, hidden) if bidirectional else None
        return cls(cell, fwd, bwd)

    def _dir_params(self, prefix: str) -> dict:
        return {name: self.params[f"{prefix}_{name}"] for name in ("W", "U", "b")}

    @property
    def hidden(self) -> int:
        return self.params["fwd_U"].shape[1]

    def config(self):
        return {"kind": self.kind, "cell": self.cell, "in_dim": self.params["fwd_W"].shape[1],
                "hidden": self.hidden, "bidirectional": self.bidirectional}

    def forward(self, x, lengths, train):
        batch, steps, _ = x.shape
        if steps < 1:
            raise ValueError("recurrent layer needs a nonempty sequence")
        lengths = np.full(batch, steps) if lengths is None else np.asarray(lengths)
        self._fwd = _Direction(self.cell, self._dir_params("fwd"))
        h_fwd = self._fwd.forward(x, lengths)
        if not self.bidirectional:
            return h_fwd, None
        self._perm = reverse_within_length(lengths, steps)
        x_rev = np.take_along_axis(x, self._perm[:, :, None], axis=1)
        self._bwd = _Direction(self.cell, self._dir_params("bwd"))
        h_bwd = self._bwd.forward(x_rev, lengths)
        return np.concatenate([h_fwd, h_bwd], axis=1), None

    def backward(self, dy):
        hidden = self.hidden
        dx, grads = self._fwd.backward(dy[:, :hidden])
        for name, g in grads.items():
            self.grads[f"fwd_{name}"] = g
        if self.bidirectional:
            dx_rev, grads = self._bwd.backward(dy[:, hidden:])
            for name, g in grads.items():
                self.grads[f"bwd_{name}"] = g
            dx_b = np.zeros_like(dx_rev)
            np.put_along_axis(dx_b, self._perm[:, :, None].repeat(dx_rev.shape[2], axis=2), dx_rev, axis=1)
            dx = dx + dx_b
        return dx


def bidirectional(cell_kind: str, sequence: np.ndarray, fwd_params: dict, bwd_params: dict,
                  true_length: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Final forward and backward states for a single (S, D) sequence."""
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim != 2 or sequence.shape[0] == 0:
        raise ValueError("bidirectional needs a nonempty (S, D) sequence")
    steps = sequence.shape[0]
    length = steps if true_length is None else true_length
    layer = Recurrent(cell_kind, fwd_params, bwd_params)
    out, _ = layer.forward(sequence[None], np.array([length]), train=False)
    hidden = layer.hidden
    return out[0, :hidden], out[0, hidden:]
