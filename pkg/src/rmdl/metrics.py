"""Classification metrics: confusion matrix, accuracy, micro scores."""
from typing import NamedTuple

import numpy as np


def _check_pair(y_true, y_pred, n_classes):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(
            f"labels must be matching 1-d arrays, got {y_true.shape} and {y_pred.shape}")
    if y_true.shape[0] == 0:
        raise ValueError("no samples")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise ValueError(f"{name} values must lie in [0, {n_classes})")
    return y_true.astype(np.int64), y_pred.astype(np.int64)


def confusion_matrix(y_true, y_pred, n_classes):
    """(n_classes, n_classes) counts; rows are true, columns predicted."""
    y_true, y_pred = _check_pair(y_true, y_pred, n_classes)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def accuracy(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1 or y_true.shape[0] == 0:
        raise ValueError(
            f"labels must be matching non-empty 1-d arrays, got {y_true.shape} and {y_pred.shape}")
    return float(np.mean(y_true == y_pred))


class MicroScores(NamedTuple):
    precision: float
    recall: float
    f1: float


def micro_scores(y_true, y_pred, n_classes):
    """Micro-averaged precision, recall and F1 from pooled per-class
    true/false positive and false negative counts."""
    cm = confusion_matrix(y_true, y_pred, n_classes)
    tp = int(np.trace(cm))
    fp = int(cm.sum(axis=0).sum() - np.trace(cm))
    fn = int(cm.sum(axis=1).sum() - np.trace(cm))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MicroScores(float(precision), float(recall), float(f1))
