"""Nearest-neighbour imputation over mixed-type records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import Cohort
from .errors import AllMissingVariableError, IsolatedRecordError, ValidationError


@dataclass(frozen=True)
class ImputeConfig:
    k: int = 5
    distance: str = "gower"
    continuous_fill: str = "mean"
    nominal_fill: str = "mode"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k}")
        if self.distance != "gower":
            raise ValidationError(f"unsupported distance {self.distance!r}")
        if self.continuous_fill != "mean" or self.nominal_fill != "mode":
            raise ValidationError("only mean (continuous) / mode (nominal) fills are supported")


def variable_ranges(values: np.ndarray) -> np.ndarray:
    """Max minus min of the present cells of each column (0 if none)."""
    with np.errstate(all="ignore"):
        present = ~np.isnan(values)
        hi = np.where(present, values, -np.inf).max(axis=0, initial=-np.inf)
        lo = np.where(present, values, np.inf).min(axis=0, initial=np.inf)
    rng = hi - lo
    rng[~np.isfinite(rng)] = 0.0
    return rng


def gower_distances(row: np.ndarray, others: np.ndarray, ranges: np.ndarray,
                    nominal: np.ndarray) -> np.ndarray:
    """Gower distance from ``row`` to every row of ``others``.

    Continuous cells contribute ``|a - b| / range`` (0 for a zero range),
    nominal cells a 0/1 mismatch; contributions are averaged over the cells
    present in both records. No shared cells gives ``inf``.
    """
    diff = np.abs(others - row)
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = np.where(ranges > 0, diff / np.where(ranges > 0, ranges, 1.0), 0.0)
    contrib = np.where(nominal, (diff > 0).astype(np.float64), scaled)
    mutual = ~np.isnan(diff)
    count = mutual.sum(axis=1)
    total = np.where(mutual, contrib, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.inf)


def gower_matrix(values: np.ndarray, ranges: np.ndarray, nominal: np.ndarray) -> np.ndarray:
    return np.stack([gower_distances(r, values, ranges, nominal) for r in values]) \
        if len(values) else np.zeros((0, 0))


def nearest_donors(dist: np.ndarray, candidates: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` closest candidates; equal distances go to the lower index."""
    idx = np.flatnonzero(candidates & np.isfinite(dist))
    order = np.argsort(dist[idx], kind="stable")
    return idx[order[:k]]


def impute_cohort(cohort: Cohort, config: ImputeConfig = ImputeConfig()) -> Cohort:
    """Fill every missing cell from its ``k`` nearest donor records.

    Donors for a cell are the records where that variable is present; the
    distance is computed on the original (unimputed) cells, so the result does
    not depend on the order records are processed in. Labels play no part.
    Continuous cells take the donor mean, nominal cells the donor mode (ties
    to the lowest category index).
    """
    values = cohort.values
    missing = np.isnan(values)
    if not missing.any():
        return cohort
    n, p = values.shape
    if config.k > n - 1:
        raise ValidationError(f"k={config.k} exceeds record count - 1 ({n - 1})")
    names = cohort.schema.names
    empty_vars = [names[j] for j in np.flatnonzero(missing.all(axis=0))]
    if empty_vars:
        raise AllMissingVariableError(f"no donor values for {empty_vars}")
    empty_rows = np.flatnonzero(missing.all(axis=1))
    if empty_rows.size:
        raise IsolatedRecordError(f"records {empty_rows.tolist()} have no present cells")

    nominal = cohort.schema.nominal_mask()
    ranges = variable_ranges(values)
    present = ~missing
    out = values.copy()
    for i in np.flatnonzero(missing.any(axis=1)):
        dist = gower_distances(values[i], values, ranges, nominal)
        dist[i] = np.inf
        for j in np.flatnonzero(missing[i]):
            donors = nearest_donors(dist, present[:, j], config.k)
            if donors.size == 0:
                raise IsolatedRecordError(
                    f"record {i} shares no present variables with any donor for {names[j]!r}")
            vals = values[donors, j]
            if nominal[j]:
                out[i, j] = float(np.bincount(vals.astype(np.intp)).argmax())
            else:
                out[i, j] = vals.mean()
    return cohort.replace(values=out)
