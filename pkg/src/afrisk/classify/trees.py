"""CART decision trees (Gini impurity) and bagged random forests.

Continuous variables split on a threshold (``x <= t`` goes left); nominal
variables split on membership of a single category (``x == c`` goes left).
Leaves store the fraction of AF records that reached them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..cohort import Cohort, Kind
from ..errors import ValidationError
from .base import feature_block, scalar_or_array, training_block

_GAIN_TIE = 1e-12


@dataclass
class Node:
    value: float
    n: int
    feature: int | None = None
    threshold: float | None = None
    category: int | None = None
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value, "n": self.n}
        d = {"value": self.value, "n": self.n, "feature": self.feature,
             "left": self.left.to_dict(), "right": self.right.to_dict()}
        if self.category is not None:
            d["category"] = self.category
        else:
            d["threshold"] = self.threshold
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Node":
        if "feature" not in d:
            return cls(d["value"], d["n"])
        return cls(d["value"], d["n"], d["feature"], d.get("threshold"), d.get("category"),
                   cls.from_dict(d["left"]), cls.from_dict(d["right"]))


def gini(pos: float, n: float) -> float:
    if n == 0:
        return 0.0
    p = pos / n
    return 2.0 * p * (1.0 - p)


def gini_gain(y, left_mask) -> float:
    """Impurity decrease of splitting labels ``y`` by ``left_mask``."""
    y = np.asarray(y, dtype=np.float64)
    left = np.asarray(left_mask, dtype=bool)
    n, nl = y.size, int(left.sum())
    nr = n - nl
    parent = gini(y.sum(), n)
    return parent - (nl * gini(y[left].sum(), nl) + nr * gini(y[~left].sum(), nr)) / n


def _best_continuous(x, y, min_leaf):
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = xs.size
    nl = np.arange(1, n)
    ok = (xs[:-1] < xs[1:]) & (nl >= min_leaf) & (n - nl >= min_leaf)
    if not ok.any():
        return None
    pos_l = np.cumsum(ys)[:-1]
    pos_t = ys.sum()
    pl, pr = pos_l / nl, (pos_t - pos_l) / (n - nl)
    child = (nl * 2 * pl * (1 - pl) + (n - nl) * 2 * pr * (1 - pr)) / n
    gain = np.where(ok, gini(pos_t, n) - child, -np.inf)
    best = gain.max()
    i = int(np.flatnonzero(gain >= best - _GAIN_TIE)[0])
    return gain[i], (xs[i] + xs[i + 1]) / 2.0


def _best_nominal(x, y, min_leaf):
    n = x.size
    best = None
    parent = gini(y.sum(), n)
    for c in np.unique(x):
        left = x == c
        nl = int(left.sum())
        if nl < min_leaf or n - nl < min_leaf:
            continue
        g = parent - (nl * gini(y[left].sum(), nl) + (n - nl) * gini(y[~left].sum(), n - nl)) / n
        if best is None or g > best[0] + _GAIN_TIE:
            best = (g, int(c))
    return best


def _grow(X, y, nominal, depth, max_depth, min_leaf, mtry, rng) -> Node:
    n = y.size
    node = Node(float(y.mean()), n)
    pos = y.sum()
    if depth >= max_depth or pos == 0 or pos == n or n < 2 * min_leaf:
        return node
    d = X.shape[1]
    feats = range(d) if mtry is None or mtry >= d else np.sort(rng.choice(d, mtry, replace=False))
    best = None
    for f in feats:
        if nominal[f]:
            cand = _best_nominal(X[:, f], y, min_leaf)
        else:
            cand = _best_continuous(X[:, f], y, min_leaf)
        if cand is not None and (best is None or cand[0] > best[0] + _GAIN_TIE):
            best = (cand[0], int(f), cand[1])
    if best is None:
        return node
    _, f, split = best
    if nominal[f]:
        left = X[:, f] == split
        node.category = split
    else:
        left = X[:, f] <= split
        node.threshold = float(split)
    node.feature = f
    node.left = _grow(X[left], y[left], nominal, depth + 1, max_depth, min_leaf, mtry, rng)
    node.right = _grow(X[~left], y[~left], nominal, depth + 1, max_depth, min_leaf, mtry, rng)
    return node


def _predict_node(node: Node, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf:
            out[idx] = nd.value
            continue
        col = X[idx, nd.feature]
        go_left = col == nd.category if nd.category is not None else col <= nd.threshold
        stack.append((nd.left, idx[go_left]))
        stack.append((nd.right, idx[~go_left]))
    return out


@dataclass
class DecisionTreeModel:
    names: list[str]
    nominal: list[bool]
    root: Node
    max_depth: int
    min_leaf: int
    source_names: list[str] = field(default_factory=list)

    def predict_proba(self, data):
        X = feature_block(data, self.names, self.source_names or None)
        return scalar_or_array(data, _predict_node(self.root, X))

    def depth(self) -> int:
        def _d(nd):
            return 0 if nd.is_leaf else 1 + max(_d(nd.left), _d(nd.right))
        return _d(self.root)


@dataclass
class RandomForestModel:
    trees: list[DecisionTreeModel]
    mtry: int
    seed: int
    bootstrap: bool = True

    @property
    def names(self) -> list[str]:
        return self.trees[0].names

    def tree_predictions(self, data) -> np.ndarray:
        return np.stack([np.atleast_1d(t.predict_proba(data)) for t in self.trees])

    def predict_proba(self, data):
        out = self.tree_predictions(data).mean(axis=0)
        return scalar_or_array(data, out)


def _check_tree_params(max_depth, min_leaf):
    if max_depth < 0 or min_leaf < 1:
        raise ValidationError("max_depth must be >= 0 and min_leaf >= 1")


def train_decision_tree(train: Cohort, features, max_depth: int = 6, min_leaf: int = 5,
                        mtry: int | None = None, rng: np.random.Generator | None = None
                        ) -> DecisionTreeModel:
    """Grow a CART tree on the selected variables.

    Among equally good splits the lowest variable index wins, then the lowest
    threshold (or category index). ``mtry`` limits each split to a random
    subset of variables (used by the forest).
    """
    _check_tree_params(max_depth, min_leaf)
    names, X, y = training_block(train, features)
    nominal = [train.schema[n].kind is Kind.NOMINAL for n in names]
    return _fit_tree(X, y, names, nominal, max_depth, min_leaf, mtry, rng,
                     list(train.schema.names))


def _fit_tree(X, y, names, nominal, max_depth, min_leaf, mtry, rng, source_names):
    root = _grow(X, y, np.asarray(nominal), 0, max_depth, min_leaf, mtry, rng)
    return DecisionTreeModel(list(names), list(nominal), root, max_depth, min_leaf, source_names)


def train_random_forest(train: Cohort, features, n_trees: int = 100, mtry: int | None = None,
                        seed: int = 0, bootstrap: bool = True, max_depth: int = 6,
                        min_leaf: int = 5) -> RandomForestModel:
    """Bagged CART trees with per-split variable subsampling.

    ``mtry`` defaults to ``ceil(sqrt(d))``. Tree ``t`` draws from its own
    generator seeded by ``(seed, t)``, so the forest is reproducible and does
    not depend on the order trees are grown in.
    """
    _check_tree_params(max_depth, min_leaf)
    if n_trees < 1:
        raise ValidationError("n_trees must be >= 1")
    names, X, y = training_block(train, features)
    d = len(names)
    if mtry is None:
        mtry = int(np.ceil(np.sqrt(d)))
    if not 1 <= mtry <= d:
        raise ValidationError(f"mtry must lie in [1, {d}]")
    nominal = [train.schema[n].kind is Kind.NOMINAL for n in names]
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        idx = rng.integers(0, y.size, y.size) if bootstrap else np.arange(y.size)
        trees.append(_fit_tree(X[idx], y[idx], names, nominal, max_depth, min_leaf,
                               mtry if mtry < d else None, rng, list(train.schema.names)))
    return RandomForestModel(trees, mtry, seed, bootstrap)
