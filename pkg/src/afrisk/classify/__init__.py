"""Classifiers: logistic regression, naive Bayes, their ensemble, and the
decision-tree / random-forest baselines."""

from __future__ import annotations

from .codec import FeatureMatrixCodec
from .ensemble import TrainedEnsemble, predict_ensemble, train_ensemble
from .logistic import LogisticModel, logistic_objective, predict_logistic, train_logistic
from .naive_bayes import NaiveBayesModel, predict_naive_bayes, train_naive_bayes
from .serialize import load_model, model_from_dict, model_to_dict, save_model
from .trees import (
    DecisionTreeModel,
    RandomForestModel,
    gini_gain,
    train_decision_tree,
    train_random_forest,
)

CLASSIFIERS = ("lr", "nb", "ensemble", "tree", "forest")


def train_classifier(kind: str, train, features, seed: int = 0, **params):
    """Train the classifier named ``kind`` (one of :data:`CLASSIFIERS`).

    ``seed`` only matters for the forest; ``params`` are forwarded to the
    specific trainer.
    """
    if kind == "lr":
        return train_logistic(train, features, **params)
    if kind == "nb":
        return train_naive_bayes(train, features, **params)
    if kind == "ensemble":
        return train_ensemble(train, features, **params)
    if kind == "tree":
        return train_decision_tree(train, features, **params)
    if kind == "forest":
        return train_random_forest(train, features, seed=seed, **params)
    raise ValueError(f"unknown classifier {kind!r}; expected one of {CLASSIFIERS}")


__all__ = [
    "CLASSIFIERS", "DecisionTreeModel", "FeatureMatrixCodec", "LogisticModel", "NaiveBayesModel",
    "RandomForestModel", "TrainedEnsemble", "gini_gain", "load_model", "logistic_objective",
    "model_from_dict", "model_to_dict", "predict_ensemble", "predict_logistic",
    "predict_naive_bayes", "save_model", "train_classifier", "train_decision_tree",
    "train_ensemble", "train_logistic", "train_naive_bayes", "train_random_forest",
]
