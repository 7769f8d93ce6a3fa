"""Classification metrics: thresholded confusion counts, sensitivity and
specificity, ROC curves, and AUC."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "ConfusionMatrix",
    "RocCurve",
    "confusion_at_threshold",
    "sens_spec_acc",
    "roc_auc",
]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class RocCurve:
    """Threshold-sweep curve as (false positive rate, true positive rate)
    points from (0,0) to (1,1), plus the pairwise-ranking AUC."""

    points: tuple[tuple[float, float], ...]
    auc: float


def confusion_at_threshold(scored: Sequence[tuple[float, object]], threshold: float, positive_class) -> ConfusionMatrix:
    """Counts at one operating point. A sample is predicted positive when its
    score is >= threshold (ties count as positive)."""
    if not scored:
        raise ValueError("cannot build a confusion matrix from no samples")
    tp = fp = tn = fn = 0
    for score, label in scored:
        predicted_positive = score >= threshold
        actual_positive = label == positive_class
        if predicted_positive and actual_positive:
            tp += 1
        elif predicted_positive:
            fp += 1
        elif actual_positive:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def sens_spec_acc(cm: ConfusionMatrix) -> tuple[float | None, float | None, float | None]:
    """Sensitivity, specificity, accuracy. A metric whose denominator is zero
    comes back as None (undefined, deliberately distinct from 0)."""
    sens = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn > 0 else None
    spec = cm.tn / (cm.tn + cm.fp) if cm.tn + cm.fp > 0 else None
    acc = (cm.tp + cm.tn) / cm.total if cm.total > 0 else None
    return sens, spec, acc


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their rank range."""
    order = np.argsort(values, kind="mergesort")
    _, counts = np.unique(values[order], return_counts=True)
    ends = np.cumsum(counts).astype(np.float64)
    starts = ends - counts + 1
    ranks_sorted = np.repeat((starts + ends) / 2.0, counts)
    ranks = np.empty(len(values), dtype=np.float64)
    ranks[order] = ranks_sorted
    return ranks


def roc_auc(scored: Sequence[tuple[float, object]], positive_class) -> RocCurve:
    """ROC curve and AUC for a binary scoring.

    The AUC is the Mann-Whitney statistic: the fraction of (positive,
    negative) pairs where the positive sample scores strictly higher, with
    ties counted one half. The curve sweeps every distinct score as a
    threshold, starting at (0,0) and ending at (1,1).
    """
    scores = np.array([s for s, _ in scored], dtype=np.float64)
    positive = np.array([label == positive_class for _, label in scored], dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(scores) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs at least one positive and one negative sample")

    ranks = _average_ranks(scores)
    auc = (ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    # Sweep thresholds from high to low; each distinct score adds one point.
    order = np.argsort(-scores, kind="mergesort")
    points: list[tuple[float, float]] = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j < n and scores[order[j]] == scores[order[i]]:
            if positive[order[j]]:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j
    return RocCurve(tuple(points), float(auc))
