"""Probability-averaging ensemble of logistic regression and naive Bayes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cohort import Cohort, PatientRecord
from ..errors import ValidationError
from .logistic import LogisticModel, train_logistic
from .naive_bayes import NaiveBayesModel, train_naive_bayes


@dataclass
class TrainedEnsemble:
    lr: LogisticModel
    nb: NaiveBayesModel
    weights: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != 2 or min(w) < 0 or sum(w) <= 0:
            raise ValidationError("ensemble weights must be two nonnegative numbers, not both 0")
        self.weights = w

    @property
    def names(self) -> list[str]:
        return self.lr.names

    def predict_proba(self, data):
        p_lr = self.lr.predict_proba(data)
        p_nb = self.nb.predict_proba(data)
        w_lr, w_nb = self.weights
        out = (w_lr * np.asarray(p_lr) + w_nb * np.asarray(p_nb)) / (w_lr + w_nb)
        return float(out) if isinstance(data, PatientRecord) else out


def train_ensemble(train: Cohort, features, l2_lambda: float = 1e-3, tol: float = 1e-6,
                   max_iter: int = 500, alpha: float = 1.0, var_floor: float = 1e-9,
                   weights=(0.5, 0.5)) -> TrainedEnsemble:
    """Train both members on the same cohort and pair them."""
    return TrainedEnsemble(
        train_logistic(train, features, l2_lambda, tol, max_iter),
        train_naive_bayes(train, features, alpha, var_floor),
        weights,
    )


def predict_ensemble(ensemble: TrainedEnsemble, data):
    return ensemble.predict_proba(data)
