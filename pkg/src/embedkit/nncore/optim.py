"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> dict:
    """Update ``params`` in place and return them.

    Elements whose gradient is exactly zero keep their parameter and moments
    (a lazy update), so a zero gradient is the identity for any state and the
    padding embedding row never drifts. The step counter still advances.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for key, theta in params.items():
        g = grads[key]
        if g.shape != theta.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {key} {theta.shape}")
        m = state.m.setdefault(key, np.zeros_like(theta))
        v = state.v.setdefault(key, np.zeros_like(theta))
        touched = g != 0
        if not touched.any():
            continue
        m_new = b1 * m + (1.0 - b1) * g
        v_new = b2 * v + (1.0 - b2) * g * g
        update = lr * (m_new / c1) / (np.sqrt(v_new / c2) + state.eps)
        if not np.all(np.isfinite(update[touched])):
            raise FloatingPointError(f"non-finite Adam update for {key}")
        np.copyto(m, m_new, where=touched)
        np.copyto(v, v_new, where=touched)
        theta -= np.where(touched, update, 0.0)
    return params
