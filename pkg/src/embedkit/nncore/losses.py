"""Cross-entropy losses on clipped probabilities, with fused gradients."""

from __future__ import annotations

import numpy as np

CLIP = 1e-12
LOSSES = ("binary-cross-entropy", "categorical-cross-entropy")



def _clip(p):
    return np.clip(p, CLIP, 1.0 - CLIP)


def _check_targets(target: np.ndarray, n_classes: int) -> np.ndarray:
    target = np.asarray(target)
    if target.size and (target.min() < 0 or target.max() >= n_classes):
        raise ValueError(f"target out of range for {n_classes} classes: {target}")
    return target.astype(np.int64)


def loss_terms(kind: str, prediction, target) -> np.ndarray:
    """Per-example losses, keeping the prediction's floating dtype."""
    p = np.asarray(prediction)
    if kind == "binary-cross-entropy":
        y = _check_targets(target, 2).reshape(p.shape)
        q = _clip(p)
        return -(y * np.log(q) + (1 - y) * np.log(1.0 - q)).reshape(-1)
    if kind == "categorical-cross-entropy":
        p2 = p.reshape(-1, p.shape[-1])
        y = _check_targets(target, p2.shape[1]).reshape(-1)
        return -np.log(_clip(p2[np.arange(len(y)), y]))
    raise ValueError(f"unknown loss {kind!r}")


def loss(kind: str, prediction, target) -> float:
    """Mean loss over a batch (or a single example).

    Binary predictions are sigmoid outputs with targets in {0, 1}; categorical
    predictions are softmax rows with integer class targets.
    """
    return float(np.mean(loss_terms(kind, prediction, target)))


def fused_gradient(kind: str, prediction: np.ndarray, target) -> np.ndarray:
    """Gradient of the mean loss w.r.t. the pre-activation: (p - y) / batch."""
    p = np.asarray(prediction, dtype=np.float64)
    batch = p.shape[0]
    if kind == "binary-cross-entropy":
        y = _check_targets(target, 2).reshape(p.shape)
        return (p - y) / batch
    if kind == "categorical-cross-entropy":
        y = _check_targets(target, p.shape[1])
        grad = p.copy()
        grad[np.arange(batch), y] -= 1.0
        return grad / batch
    raise ValueError(f"unknown loss {kind!r}")
