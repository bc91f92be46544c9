"""Stratified train/validation/test splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray


def largest_remainder(total: int, ratios) -> list[int]:
    """Integer parts summing to ``total``; leftovers go to the largest fractions (earlier part on ties)."""
    raw = [total * r for r in ratios]
    parts = [int(np.floor(x)) for x in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - parts[i]), i))
    for i in order[:total - sum(parts)]:
        parts[i] += 1
    return parts


def split_dataset(labels, ratios=(0.6, 0.1, 0.3), seed: int = 0, class_names=None) -> Split:
    """Shuffle each stratum (label value) and cut it by largest-remainder rounding.

    Each returned index array is sorted, so split membership alone depends
    on the seed.
    """
    labels = np.asarray(labels)
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ValueError(f"ratios must be three nonnegative values summing to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for value in np.unique(labels):
        members = np.flatnonzero(labels == value)
        if len(members) < 3:
            name = class_names[value] if class_names is not None else value
            raise ValueError(f"class {name!r} has {len(members)} examples; at least 3 are needed to split")
        members = rng.permutation(members)
        sizes = largest_remainder(len(members), ratios)
        bounds = np.cumsum([0] + sizes)
        for k in range(3):
            parts[k].append(members[bounds[k]:bounds[k + 1]])
    train, val, test = (np.sort(np.concatenate(p)) for p in parts)
    return Split(train, val, test)
