"""Training-set balancing: random undersampling of No-AF records followed by
SMOTE oversampling of AF records.

AF is always treated as the minority class. With the default configuration
(No-AF:AF undersampled to 2:1, AF count then doubled) the output is exactly
balanced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cohort import AF, NO_AF, Cohort, Provenance
from .errors import (
    InsufficientMajorityError,
    MissingCellsError,
    TooFewMinorityError,
    ValidationError,
)
from .impute import gower_distances, nearest_donors, variable_ranges


@dataclass(frozen=True)
class ResampleConfig:
    undersample_ratio: float = 2.0
    smote_multiplier: float = 2.0
    smote_k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.undersample_ratio < 1.0:
            raise ValidationError("undersample_ratio must be >= 1")
        if self.smote_multiplier < 1.0:
            raise ValidationError("smote_multiplier must be >= 1")
        if int(self.smote_k) != self.smote_k or self.smote_k < 1:
            raise ValidationError("smote_k must be a positive integer")


UNDERSAMPLE_ONLY = ResampleConfig(undersample_ratio=1.0, smote_multiplier=1.0)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _rng(config: ResampleConfig, rng):
    return np.random.default_rng(config.seed) if rng is None else rng


def random_undersample(cohort: Cohort, config: ResampleConfig = ResampleConfig(),
                       rng: np.random.Generator | None = None) -> Cohort:
    """Keep every AF record and ``round(ratio * n_af)`` No-AF records drawn
    uniformly without replacement. Record order is preserved."""
    rng = _rng(config, rng)
    labels = cohort.labels
    af_idx = np.flatnonzero(labels == AF)
    noaf_idx = np.flatnonzero(labels == NO_AF)
    target = config.undersample_ratio * af_idx.size
    if noaf_idx.size < math.ceil(target - 1e-9):
        raise InsufficientMajorityError(
            f"need >= {math.ceil(target - 1e-9)} No-AF records for a {config.undersample_ratio}:1 "
            f"ratio, have {noaf_idx.size}")
    n_keep = min(_round_half_up(target), noaf_idx.size)
    kept = rng.choice(noaf_idx, size=n_keep, replace=False)
    keep = np.sort(np.concatenate([af_idx, kept]))
    return cohort.take(keep, provenance=Provenance.RESAMPLED)


def smote_neighbors(values: np.ndarray, k: int, ranges: np.ndarray, nominal: np.ndarray) -> list:
    """For each row, the indices of its ``k`` nearest other rows (Gower)."""
    out = []
    everyone = np.ones(len(values), dtype=bool)
    for i, row in enumerate(values):
        dist = gower_distances(row, values, ranges, nominal)
        dist[i] = np.inf
        cand = everyone.copy()
        cand[i] = False
        out.append(nearest_donors(dist, cand, k))
    return out


def smote_synthesize(pool: np.ndarray, nominal: np.ndarray, ranges: np.ndarray, n_new: int,
                     k: int, rng: np.random.Generator):
    """Draw ``n_new`` SMOTE records from the rows of ``pool``.

    Returns ``(synthetic, seed_rows, neighbour_rows)``, the last two being
    row indices into ``pool``.
    """
    m = len(pool)
    neighbors = smote_neighbors(pool, k, ranges, nominal)
    order = rng.permutation(m)
    synth = np.empty((n_new, pool.shape[1]))
    seeds = np.empty(n_new, dtype=np.intp)
    nbrs = np.empty(n_new, dtype=np.intp)
    for s in range(n_new):
        i = order[s % m]
        j = neighbors[i][rng.integers(len(neighbors[i]))]
        seed_row, nb_row = pool[i], pool[j]
        u = rng.random()
        interp = seed_row + u * (nb_row - seed_row)
        interp = np.clip(interp, np.minimum(seed_row, nb_row), np.maximum(seed_row, nb_row))
        coin = rng.random(pool.shape[1]) < 0.5
        synth[s] = np.where(nominal, np.where(coin, seed_row, nb_row), interp)
        seeds[s], nbrs[s] = i, j
    return synth, seeds, nbrs


def smote_oversample(cohort: Cohort, config: ResampleConfig = ResampleConfig(),
                     rng: np.random.Generator | None = None) -> Cohort:
    """Append ``round((multiplier - 1) * n_af)`` synthetic AF records.

    Seeds are taken round-robin over a shuffled copy of the AF records. Each
    synthetic record interpolates continuous cells toward one of the seed's
    ``smote_k`` nearest AF neighbours (one uniform ``u`` per record) and takes
    each nominal cell from the seed or the neighbour with equal probability.
    """
    rng = _rng(config, rng)
    if cohort.has_missing:
        raise MissingCellsError("SMOTE needs a complete cohort; impute first")
    minority = np.flatnonzero(cohort.labels == AF)
    m = minority.size
    if m < 2:
        raise TooFewMinorityError(f"SMOTE needs >= 2 AF records, have {m}")
    n_new = _round_half_up((config.smote_multiplier - 1.0) * m)
    if n_new == 0:
        return cohort.replace(provenance=Provenance.RESAMPLED)

    synth, _, _ = smote_synthesize(cohort.values[minority], cohort.schema.nominal_mask(),
                                   variable_ranges(cohort.values), n_new,
                                   min(config.smote_k, m - 1), rng)
    values = np.vstack([cohort.values, synth])
    labels = np.concatenate([cohort.labels, np.full(n_new, AF, dtype=np.int8)])
    return Cohort(cohort.schema, values, labels, Provenance.RESAMPLED)


def balance_training_set(cohort: Cohort, config: ResampleConfig = ResampleConfig(),
                         rng: np.random.Generator | None = None) -> Cohort:
    """Undersample No-AF, then SMOTE the AF class, from one random stream."""
    rng = _rng(config, rng)
    under = random_undersample(cohort, config, rng)
    return smote_oversample(under, config, rng)
