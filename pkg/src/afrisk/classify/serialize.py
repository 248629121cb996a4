"""Versioned JSON documents for trained models."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..cohort import Kind
from ..errors import ValidationError
from .codec import FeatureMatrixCodec
from .ensemble import TrainedEnsemble
from .logistic import LogisticModel
from .naive_bayes import NaiveBayesModel
from .trees import DecisionTreeModel, Node, RandomForestModel

FORMAT = "afrisk-model"
VERSION = 1


def _lr_to_dict(m: LogisticModel) -> dict:
    return {
        "weights": [float(w) for w in m.weights], "intercept": m.intercept,
        "l2_lambda": m.l2_lambda, "codec": m.codec.to_dict(), "source_names": m.source_names,
        "converged": m.converged, "grad_norm": m.grad_norm, "n_iter": m.n_iter,
    }


def _lr_from_dict(d: dict) -> LogisticModel:
    return LogisticModel(np.array(d["weights"], dtype=np.float64), d["intercept"], d["l2_lambda"],
                         FeatureMatrixCodec.from_dict(d["codec"]), list(d["source_names"]),
                         d["converged"], d["grad_norm"], d["n_iter"])


def _nb_to_dict(m: NaiveBayesModel) -> dict:
    return {
        "names": m.names, "kinds": [k.value for k in m.kinds], "priors": m.priors.tolist(),
        "gauss": {k: [mu.tolist(), v.tolist()] for k, (mu, v) in m.gauss.items()},
        "cat_probs": {k: p.tolist() for k, p in m.cat_probs.items()},
        "alpha": m.alpha, "var_floor": m.var_floor, "source_names": m.source_names,
    }


def _nb_from_dict(d: dict) -> NaiveBayesModel:
    return NaiveBayesModel(
        list(d["names"]), [Kind(k) for k in d["kinds"]], np.array(d["priors"]),
        {k: (np.array(mu), np.array(v)) for k, (mu, v) in d["gauss"].items()},
        {k: np.array(p) for k, p in d["cat_probs"].items()},
        d["alpha"], d["var_floor"], list(d["source_names"]))


def _tree_to_dict(m: DecisionTreeModel) -> dict:
    return {"names": m.names, "nominal": m.nominal, "max_depth": m.max_depth,
            "min_leaf": m.min_leaf, "source_names": m.source_names, "root": m.root.to_dict()}


def _tree_from_dict(d: dict) -> DecisionTreeModel:
    return DecisionTreeModel(list(d["names"]), list(d["nominal"]), Node.from_dict(d["root"]),
                             d["max_depth"], d["min_leaf"], list(d["source_names"]))


def model_to_dict(model) -> dict:
    if isinstance(model, TrainedEnsemble):
        body = {"kind": "ensemble", "weights": list(model.weights),
                "lr": _lr_to_dict(model.lr), "nb": _nb_to_dict(model.nb)}
    elif isinstance(model, LogisticModel):
        body = {"kind": "lr", "lr": _lr_to_dict(model)}
    elif isinstance(model, NaiveBayesModel):
        body = {"kind": "nb", "nb": _nb_to_dict(model)}
    elif isinstance(model, DecisionTreeModel):
        body = {"kind": "tree", "tree": _tree_to_dict(model)}
    elif isinstance(model, RandomForestModel):
        body = {"kind": "forest", "mtry": model.mtry, "seed": model.seed,
                "bootstrap": model.bootstrap, "trees": [_tree_to_dict(t) for t in model.trees]}
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return {"format": FORMAT, "version": VERSION, **body}


def model_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise ValidationError("not a model document")
    if d.get("version") != VERSION:
        raise ValidationError(f"unsupported model document version {d.get('version')}")
    kind = d.get("kind")
    if kind == "ensemble":
        return TrainedEnsemble(_lr_from_dict(d["lr"]), _nb_from_dict(d["nb"]), tuple(d["weights"]))
    if kind == "lr":
        return _lr_from_dict(d["lr"])
    if kind == "nb":
        return _nb_from_dict(d["nb"])
    if kind == "tree":
        return _tree_from_dict(d["tree"])
    if kind == "forest":
        return RandomForestModel([_tree_from_dict(t) for t in d["trees"]], d["mtry"], d["seed"],
                                 d["bootstrap"])
    raise ValidationError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
