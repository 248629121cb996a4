"""ROC/AUC and threshold metrics for binary scores."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # first entry is +inf (nothing predicted positive)


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.size != y.size:
        raise ValidationError(f"{s.size} scores but {y.size} labels")
    if not np.isin(y, (0, 1)).all():
        raise ValidationError("labels must be 0/1")
    if np.isnan(s).any():
        raise ValidationError("scores contain NaN")
    return s, y.astype(np.int8)


def roc_curve(scores, labels) -> RocCurve:
    """ROC points from sweeping every distinct score, highest first.

    Tied scores move together, so each tie group adds one (possibly
    diagonal) segment.
    """
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("ROC needs both positive and negative labels")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y)[last_of_group]
    fp = (last_of_group + 1) - tp
    return RocCurve(np.r_[0.0, fp / n_neg], np.r_[0.0, tp / n_pos], np.r_[np.inf, s[last_of_group]])


def trapezoid_auc(curve: RocCurve) -> float:
    x, y = curve.fpr, curve.tpr
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2.0))


def compute_roc_auc(scores, labels) -> tuple[RocCurve, float]:
    """ROC curve and its trapezoidal area.

    With ties grouped this area equals the tie-corrected Mann-Whitney
    statistic, i.e. the C-index.
    """
    curve = roc_curve(scores, labels)
    return curve, trapezoid_auc(curve)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def sensitivity(self) -> float:
        pos = self.tp + self.fn
        return self.tp / pos if pos else math.nan

    @property
    def specificity(self) -> float:
        neg = self.tn + self.fp
        return self.tn / neg if neg else math.nan

    @property
    def false_negative_rate(self) -> float:
        pos = self.tp + self.fn
        return self.fn / pos if pos else math.nan

    @property
    def false_positive_rate(self) -> float:
        neg = self.tn + self.fp
        return self.fp / neg if neg else math.nan


def confusion_at_threshold(scores, labels, threshold: float = 0.5) -> ConfusionCounts:
    """Counts with ``score >= threshold`` predicted positive."""
    s, y = _check(scores, labels)
    if s.size == 0:
        raise ValidationError("no scores")
    pred = s >= threshold
    pos = y == 1
    return ConfusionCounts(
        tp=int(np.count_nonzero(pred & pos)),
        fp=int(np.count_nonzero(pred & ~pos)),
        tn=int(np.count_nonzero(~pred & ~pos)),
        fn=int(np.count_nonzero(~pred & pos)),
    )
