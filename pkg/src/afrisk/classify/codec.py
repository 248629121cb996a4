"""Numeric encoding of mixed-type feature blocks for logistic regression."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..cohort import Kind, Schema


@dataclass
class FeatureMatrixCodec:
    """z-scores continuous columns and expands nominal ones into one-of-C
    indicators over the categories seen in training.

    ``oov_count`` accumulates how many nominal cells were outside the training
    vocabulary (those encode as an all-zero indicator block).
    """

    names: list[str]
    kinds: list[Kind]
    means: list[float | None]
    sds: list[float | None]
    vocab: list[list[int] | None]
    oov_count: int = field(default=0, compare=False)

    @classmethod
    def fit(cls, X: np.ndarray, names, schema: Schema) -> "FeatureMatrixCodec":
        kinds, means, sds, vocab = [], [], [], []
        for j, name in enumerate(names):
            var = schema[name]
            kinds.append(var.kind)
            col = X[:, j]
            if var.kind is Kind.CONTINUOUS:
                sd = float(col.std())
                means.append(float(col.mean()))
                sds.append(sd if sd > 0 else 1.0)
                vocab.append(None)
            else:
                means.append(None)
                sds.append(None)
                vocab.append(sorted(int(v) for v in np.unique(col)))
        return cls(list(names), kinds, means, sds, vocab)

    @property
    def width(self) -> int:
        return sum(1 if k is Kind.CONTINUOUS else len(v) for k, v in zip(self.kinds, self.vocab))

    @property
    def column_labels(self) -> list[str]:
        out = []
        for name, kind, voc in zip(self.names, self.kinds, self.vocab):
            if kind is Kind.CONTINUOUS:
                out.append(name)
            else:
                out.extend(f"{name}={c}" for c in voc)
        return out

    def encode(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        blocks = []
        for j, kind in enumerate(self.kinds):
            col = X[:, j]
            if kind is Kind.CONTINUOUS:
                blocks.append(((col - self.means[j]) / self.sds[j])[:, None])
            else:
                voc = np.array(self.vocab[j], dtype=np.float64)
                ind = (col[:, None] == voc[None, :]).astype(np.float64)
                self.oov_count += int(np.count_nonzero(ind.sum(axis=1) == 0))
                blocks.append(ind)
        return np.hstack(blocks) if blocks else np.zeros((X.shape[0], 0))

    def decode(self, Z: np.ndarray) -> np.ndarray:
        Z = np.atleast_2d(Z)
        out = np.empty((Z.shape[0], len(self.names)))
        c = 0
        for j, kind in enumerate(self.kinds):
            if kind is Kind.CONTINUOUS:
                out[:, j] = Z[:, c] * self.sds[j] + self.means[j]
                c += 1
            else:
                width = len(self.vocab[j])
                block = Z[:, c:c + width]
                out[:, j] = np.array(self.vocab[j], dtype=np.float64)[block.argmax(axis=1)]
                c += width
        return out

    def to_dict(self) -> dict:
        return {"names": self.names, "kinds": [k.value for k in self.kinds],
                "means": self.means, "sds": self.sds, "vocab": self.vocab}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMatrixCodec":
        return cls(list(d["names"]), [Kind(k) for k in d["kinds"]], list(d["means"]),
                   list(d["sds"]), [None if v is None else list(v) for v in d["vocab"]])
