"""Helpers shared by the classifiers: pulling the feature block out of a
cohort or a single record."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..cohort import AF, Cohort, PatientRecord
from ..errors import (
    MissingCellsError,
    NoSelectedFeaturesError,
    SingleClassError,
    UnknownVariableError,
)
from ..selection import feature_names


def training_block(train: Cohort, features) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Validate a training cohort and return ``(names, X, y)``."""
    names = feature_names(features)
    if not names:
        raise NoSelectedFeaturesError("no selected features to train on")
    X = feature_block(train, names)
    y = train.labels.astype(np.float64)
    if y.size == 0 or np.all(y == AF) or np.all(y != AF):
        raise SingleClassError("training data must contain both classes")
    return names, X, y


def feature_block(data, names: Sequence[str], source_names: Sequence[str] | None = None) -> np.ndarray:
    """Raw ``(n, len(names))`` matrix for a Cohort, a PatientRecord or an array.

    A PatientRecord is read through ``source_names`` (the schema order its
    values follow); a bare array is taken to be in ``names`` order already.
    """
    if isinstance(data, Cohort):
        X = data.values[:, [data.schema.index(n) for n in names]]
    elif isinstance(data, PatientRecord):
        if source_names is None:
            X = np.array([[np.nan if v is None else v for v in data.values]], dtype=np.float64)
        else:
            pos = {n: i for i, n in enumerate(source_names)}
            try:
                cells = [data.values[pos[n]] for n in names]
            except KeyError as exc:
                raise UnknownVariableError(f"record lacks variable {exc}") from None
            X = np.array([[np.nan if v is None else v for v in cells]], dtype=np.float64)
    else:
        X = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if X.shape[1] != len(names):
        raise UnknownVariableError(f"expected {len(names)} feature columns, got {X.shape[1]}")
    if np.isnan(X).any():
        raise MissingCellsError("records must be complete on the selected variables")
    return X


def scalar_or_array(data, out: np.ndarray):
    return float(out[0]) if isinstance(data, PatientRecord) else out
