"""Central finite-difference check of a graph's analytic gradients."""

from __future__ import annotations

import numpy as np

from ..corpus import PAD_ID
from .graph import LayerGraph
from .layers import Dropout, Embedding
from .losses import loss_terms


def relative_error(a, n):
    a, n = np.asarray(a), np.asarray(n)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)


def grad_check(graph: LayerGraph, ids, lengths, targets, eps: float = 1e-5,
               oracle_dtype=np.longdouble) -> float:
    """Largest relative error between backprop and finite differences.

    Backprop runs in the graph's own float64. The finite-difference oracle
    re-evaluates the loss in ``oracle_dtype`` (extended precision where the
    platform has it) so that its rounding noise, about ulp(loss) / eps, does
    not swamp gradients near 1e-7. Runs in train mode with every dropout rate
    forced to zero; the padding embedding row is skipped because its gradient
    is masked by design.
    """
    saved_rates = [(layer, layer.rate) for layer in graph.layers if isinstance(layer, Dropout)]
    was_training = graph.training
    originals = [(layer, name, p) for layer in graph.layers for name, p in layer.params.items()]
    for layer, _ in saved_rates:
        layer.rate = 0.0
    graph.train()
    try:
        graph.loss_and_backward(ids, lengths, targets)
        analytic = {k: g.copy() for k, g in graph.gradients().items()}
        for layer, name, p in originals:
            layer.params[name] = p.astype(oracle_dtype)

        def objective():
            return np.mean(loss_terms(graph.loss_kind, graph.forward(ids, lengths), targets))

        skipped = {f"{i}.weight" for i, layer in enumerate(graph.layers) if isinstance(layer, Embedding)}
        worst = 0.0
        for key, theta in graph.parameters().items():
            flat = theta.reshape(-1)
            numeric = analytic[key].reshape(-1).astype(oracle_dtype)
            for j in range(flat.size):
                if key in skipped and j // theta.shape[1] == PAD_ID:
                    continue
                orig = flat[j]
                flat[j] = orig + eps
                up = objective()
                flat[j] = orig - eps
                down = objective()
                flat[j] = orig
                numeric[j] = (up - down) / (2 * eps)
            err = relative_error(analytic[key].reshape(-1), numeric)
            worst = max(worst, float(err.max(initial=0.0)))
        return worst
    finally:
        for layer, name, p in originals:
            layer.params[name] = p
        for layer, rate in saved_rates:
            layer.rate = rate
        graph.training = was_training
