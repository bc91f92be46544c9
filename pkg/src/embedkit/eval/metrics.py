"""Confusion matrices, macro-averaged P/R/F and Fleiss' kappa."""

from __future__ import annotations

import numpy as np


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape[0]} true labels, {y_pred.shape[0]} predictions")
    for name, y in (("true", y_true), ("predicted", y_pred)):
        if y.size and (y.min() < 0 or y.max() >= n_classes):
            raise ValueError(f"{name} label out of range [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den != 0)


def per_class_prf(cm: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cm = np.asarray(cm)
    diag = np.diag(cm)
    precision = _safe_div(diag, cm.sum(axis=0))
    recall = _safe_div(diag, cm.sum(axis=1))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return precision, recall, f1


def macro_prf(cm: np.ndarray, f_of_means: bool = False) -> tuple[float, float, float]:
    """Unweighted class means of precision, recall and F1 (0/0 counts as 0).

    With ``f_of_means`` the F value is instead the harmonic mean of macro-P
    and macro-R.
    """
    cm = np.asarray(cm)
    if cm.sum() <= 0:
        raise ValueError("confusion matrix is empty")
    precision, recall, f1 = per_class_prf(cm)
    p, r = float(precision.mean()), float(recall.mean())
    if f_of_means:
        return p, r, (2 * p * r / (p + r) if p + r else 0.0)
    return p, r, float(f1.mean())


def fleiss_kappa(ratings) -> float:
    """Agreement of n raters over N items; ``ratings`` is an N x C count table."""
    table = np.asarray(ratings, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] == 0:
        raise ValueError("ratings must be a nonempty N x C table")
    sums = table.sum(axis=1)
    n = sums[0]
    bad = np.flatnonzero(sums != n)
    if bad.size:
        raise ValueError(f"item {int(bad[0])} has {sums[bad[0]]:g} ratings, expected {n:g}")
    if n < 2:
        raise ValueError("need at least 2 raters per item")
    items = table.shape[0]
    agreement = ((table * (table - 1)).sum(axis=1) / (n * (n - 1))).mean()
    if agreement == 1.0:
        return 1.0
    marginals = table.sum(axis=0) / (items * n)
    expected = float((marginals ** 2).sum())
    return float((agreement - expected) / (1.0 - expected))


def majority_baseline_macro_f(labels, n_classes: int) -> float:
    """Macro-F of always predicting the most frequent label (lowest id on ties)."""
    labels = np.asarray(labels, dtype=np.int64)
    majority = int(np.argmax(np.bincount(labels, minlength=n_classes)))
    return macro_prf(confusion_matrix(labels, np.full_like(labels, majority), n_classes))[2]
