"""Decision threshold calibration with Youden's J statistic.

A slide is called positive iff its score is ``>= threshold``. Candidate
thresholds are the distinct observed scores.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence

__all__ = ["RocPoint", "DecisionThreshold", "roc_points", "youden_threshold"]


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    sensitivity: float
    specificity: float
    tp: int
    tn: int

    @property
    def j(self) -> float:
        return self.sensitivity + self.specificity - 1.0


@dataclass(frozen=True)
class DecisionThreshold:
    value: float
    sensitivity: float
    specificity: float
    j: float


def _check(scores: Sequence[float], labels: Sequence[int]) -> None:
    if len(scores) != len(labels):
        raise ValueError(f"{len(scores)} scores but {len(labels)} labels")
    if any(y not in (0, 1) for y in labels):
        raise ValueError("labels must be 0 or 1")
    n_pos = sum(labels)
    if n_pos == 0 or n_pos == len(labels):
        raise ValueError("need at least one positive and one negative label")


def roc_points(scores: Sequence[float], labels: Sequence[int]) -> list[RocPoint]:
    """One ROC point per distinct score, thresholds in descending order."""
    _check(scores, labels)
    pos = sorted(s for s, y in zip(scores, labels) if y == 1)
    neg = sorted(s for s, y in zip(scores, labels) if y == 0)
    n_pos, n_neg = len(pos), len(neg)
    points = []
    for t in sorted(set(scores), reverse=True):
        tp = n_pos - bisect_left(pos, t)
        tn = bisect_left(neg, t)
        points.append(RocPoint(t, tp / n_pos, tn / n_neg, tp, tn))
    return points


def youden_threshold(scores: Sequence[float], labels: Sequence[int]) -> DecisionThreshold:
    """Threshold maximizing ``sensitivity + specificity - 1``.

    Ties go to the higher sensitivity, then to the smaller threshold. J is
    compared exactly as the integer ``tp * n_neg + tn * n_pos``.
    """
    points = roc_points(scores, labels)
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    best = max(points, key=lambda r: (r.tp * n_neg + r.tn * n_pos, r.tp, -r.threshold))
    return DecisionThreshold(best.threshold, best.sensitivity, best.specificity, best.j)
