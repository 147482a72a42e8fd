"""Confusion matrices and the scores derived from them.

Rows index the true class, columns the predicted class. Any 0/0 ratio
(class never predicted and never present) is defined as 0.
"""

from __future__ import annotations

import numpy as np


def confusion(true, pred, num_classes: int) -> np.ndarray:
    """Count (true, pred) pairs into a num_classes x num_classes int matrix."""
    true = np.asarray(true, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if true.shape != pred.shape or true.ndim != 1:
        raise ValueError(f"true and pred must be equal-length vectors, got {true.shape} vs {pred.shape}")
    if true.size:
        lo = min(true.min(), pred.min())
        hi = max(true.max(), pred.max())
        if lo < 0 or hi >= num_classes:
            raise ValueError(f"class index outside 0..{num_classes - 1}")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (true, pred), 1)
    return cm


def accuracy(cm: np.ndarray) -> float:
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix has no accuracy")
    return float(np.trace(cm)) / total


def precision_recall_f1(cm: np.ndarray, c: int) -> tuple[float, float, float]:
    """Per-class precision TP/(TP+FP), recall TP/(TP+FN), and their harmonic mean."""
    tp = float(cm[c, c])
    fp = float(cm[:, c].sum() - tp)
    fn = float(cm[c, :].sum() - tp)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def macro_f1(cm: np.ndarray) -> float:
    """Unweighted mean of per-class F1 over every class, present or not."""
    n = cm.shape[0]
    return float(np.mean([precision_recall_f1(cm, c)[2] for c in range(n)]))
