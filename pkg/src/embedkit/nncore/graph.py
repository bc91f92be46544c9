"""Static ordered layer graph with a fused output loss and npz checkpoints."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .layers import Activation, Conv1D, Dense, Dropout, Embedding, Layer, MaxPool, softmax, sigmoid
from .losses import fused_gradient, loss
from .recurrent import Recurrent

HEADS = {"sigmoid": "binary-cross-entropy", "softmax": "categorical-cross-entropy"}


class LayerGraph:
    """Layers applied in order, followed by a sigmoid or softmax head.

    The last layer produces pre-activations; the head and its cross-entropy
    loss are fused so backward starts from ``p - y``.
    """

    def __init__(self, layers: list[Layer], head: str, metadata: dict | None = None):
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        self.layers = layers
        self.head = head
        self.training = False
        self.metadata = dict(metadata or {})

    # -- modes -------------------------------------------------------------------------

    def train(self) -> "LayerGraph":
        self.training = True
        return self

    def eval(self) -> "LayerGraph":
        self.training = False
        return self

    # -- parameters --------------------------------------------------------------------

    def parameters(self, trainable_only: bool = True) -> dict[str, np.ndarray]:
        """Flat mapping ``"<layer index>.<name>" -> array`` (live references)."""
        out = {}
        for i, layer in enumerate(self.layers):
            if trainable_only and not layer.trainable:
                continue
            for name, p in layer.params.items():
                out[f"{i}.{name}"] = p
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            if not layer.trainable:
                continue
            for name, p in layer.params.items():
                out[f"{i}.{name}"] = layer.grads.get(name, np.zeros_like(p))
        return out

    def param_count(self) -> int:
        return sum(layer.param_count() for layer in self.layers)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.parameters(trainable_only=False).items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for key, value in self.parameters(trainable_only=False).items():
            value[...] = snapshot[key]

    # -- computation -------------------------------------------------------------------

    def logits(self, ids: np.ndarray, lengths: np.ndarray | None) -> np.ndarray:
        x = ids
        for layer in self.layers:
            x, lengths = layer.forward(x, lengths, self.training)
        return x

    def forward(self, ids: np.ndarray, lengths: np.ndarray | None = None) -> np.ndarray:
        """Head probabilities: (B, 1) sigmoid or (B, C) softmax."""
        z = self.logits(ids, lengths)
        return sigmoid(z) if self.head == "sigmoid" else softmax(z)

    @property
    def loss_kind(self) -> str:
        return HEADS[self.head]

    def loss(self, ids, lengths, targets) -> float:
        return loss(self.loss_kind, self.forward(ids, lengths), targets)

    def loss_and_backward(self, ids, lengths, targets) -> float:
        """Mean batch loss; fills every trainable layer's ``grads``."""
        p = self.forward(ids, lengths)
        value = loss(self.loss_kind, p, targets)
        dy = fused_gradient(self.loss_kind, p, targets)
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return value

    # -- checkpoints -------------------------------------------------------------------

    def spec(self) -> dict:
        return {"head": self.head, "layers": [layer.config() for layer in self.layers],
                "metadata": self.metadata}

    def save(self, path: str | Path) -> None:
        arrays = {f"p{key}": value for key, value in self.parameters(trainable_only=False).items()}
        arrays["spec"] = np.array(json.dumps(self.spec(), sort_keys=True))
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "LayerGraph":
        try:
            with np.load(path, allow_pickle=False) as data:
                spec = json.loads(str(data["spec"]))
                arrays = {k[1:]: data[k] for k in data.files if k != "spec"}
        except (OSError, ValueError, KeyError) as exc:
            raise ValueError(f"{path}: not a model checkpoint ({exc})") from exc
        layers = [_layer_from_config(i, cfg, arrays) for i, cfg in enumerate(spec["layers"])]
        return cls(layers, spec["head"], spec.get("metadata"))


def _layer_from_config(index: int, cfg: dict, arrays: dict) -> Layer:
    def p(name):
        return arrays[f"{index}.{name}"].astype(np.float64)

    kind = cfg["kind"]
    if kind == "embedding":
        return Embedding(p("weight"), trainable=cfg["trainable"])
    if kind == "conv1d":
        return Conv1D(p("filters"), p("bias"))
    if kind == "activation":
        return Activation(cfg["fn"])
    if kind == "dropout":
        return Dropout(cfg["rate"], cfg.get("seed", 0))
    if kind == "maxpool":
        return MaxPool(cfg["mode"], cfg["width"], cfg["stride"])
    if kind == "dense":
        return Dense(p("weight"), p("bias"))
    if kind == "recurrent":
        fwd = {n: p(f"fwd_{n}") for n in ("W", "U", "b")}
        bwd = {n: p(f"bwd_{n}") for n in ("W", "U", "b")} if cfg["bidirectional"] else None
        return Recurrent(cfg["cell"], fwd, bwd)
    raise ValueError(f"unknown layer kind {kind!r} in checkpoint")
