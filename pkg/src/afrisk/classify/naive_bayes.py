"""Naive Bayes over mixed continuous (Gaussian) and nominal (categorical)
variables."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..cohort import AF, Cohort, Kind
from ..errors import ValidationError
from .base import feature_block, scalar_or_array, training_block


@dataclass
class NaiveBayesModel:
    """Per-class parameters are indexed ``[NoAF, AF]``.

    ``gauss[name] = (means, variances)`` for continuous variables and
    ``cat_probs[name]`` is a ``(2, n_categories)`` array for nominal ones.
    """

    names: list[str]
    kinds: list[Kind]
    priors: np.ndarray
    gauss: dict
    cat_probs: dict
    alpha: float
    var_floor: float
    source_names: list[str]

    def class_log_likelihoods(self, data) -> np.ndarray:
        """Joint log density ``log P(class) + sum log P(x_j | class)``, shape (n, 2)."""
        X = feature_block(data, self.names, self.source_names)
        with np.errstate(divide="ignore"):
            ll = np.tile(np.log(self.priors), (X.shape[0], 1))
            for j, (name, kind) in enumerate(zip(self.names, self.kinds)):
                x = X[:, j][:, None]
                if kind is Kind.CONTINUOUS:
                    mu, var = self.gauss[name]
                    ll += -0.5 * np.log(2.0 * math.pi * var) - (x - mu) ** 2 / (2.0 * var)
                else:
                    probs = self.cat_probs[name]
                    idx = X[:, j].astype(np.intp)
                    ok = (idx >= 0) & (idx < probs.shape[1])
                    # categories outside the stored table carry no evidence
                    ll[ok] += np.log(probs[:, idx[ok]]).T
        return ll

    def predict_proba(self, data):
        ll = self.class_log_likelihoods(data)
        both_dead = np.all(np.isneginf(ll), axis=1)
        ll[both_dead] = np.log(self.priors)
        post = np.exp(ll[:, 1] - logsumexp(ll, axis=1))
        return scalar_or_array(data, post)


def _exact_mean(x: np.ndarray) -> float:
    # correctly rounded sum, so duplicating the training set is bit-for-bit neutral
    return math.fsum(x) / x.size


def train_naive_bayes(train: Cohort, features, alpha: float = 1.0,
                      var_floor: float = 1e-9) -> NaiveBayesModel:
    """Fit class priors, per-class Gaussians and Laplace-smoothed category
    frequencies.

    Variances are maximum-likelihood (divide by n) and floored at
    ``var_floor * range**2`` of the variable over ``train`` (``var_floor``
    itself when the range is zero).
    """
    if alpha < 0:
        raise ValidationError("alpha must be >= 0")
    if var_floor <= 0:
        raise ValidationError("var_floor must be > 0")
    names, X, y = training_block(train, features)
    is_af = y == AF
    n_af = int(np.count_nonzero(is_af))
    priors = np.array([(y.size - n_af) / y.size, n_af / y.size])
    kinds, gauss, cat = [], {}, {}
    for j, name in enumerate(names):
        var = train.schema[name]
        kinds.append(var.kind)
        col = X[:, j]
        if var.kind is Kind.CONTINUOUS:
            span = float(col.max() - col.min())
            floor = var_floor * span * span if span > 0 else var_floor
            groups = (col[~is_af], col[is_af])
            mu = np.array([_exact_mean(g) for g in groups])
            v = np.array([max(_exact_mean((g - m) ** 2), floor) for g, m in zip(groups, mu)])
            gauss[name] = (mu, v)
        else:
            n_cat = len(var.categories)
            probs = np.empty((2, n_cat))
            for c, mask in enumerate((~is_af, is_af)):
                counts = np.bincount(col[mask].astype(np.intp), minlength=n_cat).astype(np.float64)
                probs[c] = (counts + alpha) / (counts.sum() + alpha * n_cat)
            cat[name] = probs
    return NaiveBayesModel(names, kinds, priors, gauss, cat, alpha, var_floor,
                           list(train.schema.names))


def predict_naive_bayes(model: NaiveBayesModel, data):
    """Posterior P(AF | x) for a record (float) or a cohort (array)."""
    return model.predict_proba(data)
