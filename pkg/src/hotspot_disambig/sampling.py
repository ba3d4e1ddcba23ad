"""Negative-class undersampling and the 50-way stratified split protocol.

Strata are 1 x 1 degree geographic cells (times label for splitting) so both
operations keep the geographic distribution of the data.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

ROLE_SPLITS = (28, 14, 8)  # train / val / test out of 50
ROLES = ("train", "val", "test")


def geo_cells(lat, lon, cell_deg: float = 1.0) -> np.ndarray:
    """Integer cell key per point."""
    if cell_deg <= 0:
        raise ValueError("cell_deg must be positive")
    rows = np.floor((np.asarray(lat, dtype=np.float64) + 90.0) / cell_deg).astype(np.int64)
    cols = np.floor((np.asarray(lon, dtype=np.float64) + 180.0) / cell_deg).astype(np.int64)
    return rows * 100_000 + cols


def proportional_allocation(counts, total: int) -> np.ndarray:
    """Largest-remainder allocation of ``total`` across strata proportional to ``counts``.

    Each stratum receives floor or ceil of its exact quota, and never more than it holds.
    Ties in the remainder go to the earlier stratum.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if total > counts.sum():
        raise ValueError("cannot allocate more than the strata hold")
    if total == 0 or counts.sum() == 0:
        return np.zeros_like(counts)
    quota = counts * (total / counts.sum())
    alloc = np.floor(quota).astype(np.int64)
    remainder = quota - alloc
    order = np.lexsort((np.arange(len(counts)), -remainder))
    alloc[order[: total - alloc.sum()]] += 1
    return np.minimum(alloc, counts)


def undersample_indices(lat, lon, labels, target_pos_frac: float = 0.10, seed: int = 0,
                        cell_deg: float = 1.0) -> np.ndarray:
    """Sorted indices kept after undersampling the negative class.

    All positives are kept. Negatives are drawn without replacement per cell,
    proportional to the cell's negative count, until there are
    ``round(positives * (1 - f) / f)`` of them.
    """
    y = np.asarray(labels).astype(np.int64)
    if not 0.0 < target_pos_frac < 1.0:
        raise ValueError("target_pos_frac must be in (0, 1)")
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) == 0:
        raise ValueError("undersampling needs at least one positive record")
    n_target = int(round(len(pos) * (1.0 - target_pos_frac) / target_pos_frac))
    if n_target >= len(neg):
        if n_target > len(neg):
            warnings.warn(
                f"only {len(neg)} negatives available, {n_target} requested; keeping all records",
                stacklevel=2,
            )
        return np.arange(len(y))
    cells = geo_cells(np.asarray(lat)[neg], np.asarray(lon)[neg], cell_deg)
    keys, inverse, counts = np.unique(cells, return_inverse=True, return_counts=True)
    alloc = proportional_allocation(counts, n_target)
    rng = np.random.default_rng(seed)
    kept = [pos]
    for k in range(len(keys)):
        members = neg[inverse == k]
        if alloc[k]:
            kept.append(rng.choice(members, size=int(alloc[k]), replace=False))
    return np.sort(np.concatenate(kept))


def undersample(records, target_pos_frac: float = 0.10, seed: int = 0, cell_deg: float = 1.0) -> list:
    """Undersample labeled hotspot records; see :func:`undersample_indices`."""
    records = list(records)
    keep = undersample_indices(
        [r.point.lat for r in records], [r.point.lon for r in records], [r.label for r in records],
        target_pos_frac, seed, cell_deg,
    )
    return [records[i] for i in keep]


def role_counts(n_splits: int) -> tuple:
    """Number of splits per role; 28/14/8 for 50 and proportional otherwise."""
    if n_splits < 3:
        raise ValueError("n_splits must be at least 3")
    total = sum(ROLE_SPLITS)
    n_train = max(1, round(n_splits * ROLE_SPLITS[0] / total))
    n_val = max(1, round(n_splits * ROLE_SPLITS[1] / total))
    n_train = min(n_train, n_splits - 2)
    n_val = min(n_val, n_splits - n_train - 1)
    return n_train, n_val, n_splits - n_train - n_val


@dataclass
class SplitAssignment:
    split: np.ndarray  # split index per record, in input order
    n_splits: int
    seed: int

    @property
    def role_ranges(self) -> dict:
        n_train, n_val, _ = role_counts(self.n_splits)
        return {
            "train": range(0, n_train),
            "val": range(n_train, n_train + n_val),
            "test": range(n_train + n_val, self.n_splits),
        }

    def role_of_split(self, s: int) -> str:
        for role, rng in self.role_ranges.items():
            if s in rng:
                return role
        raise ValueError(f"split {s} out of range")

    @property
    def roles(self) -> np.ndarray:
        lookup = np.array([self.role_of_split(s) for s in range(self.n_splits)])
        return lookup[self.split]

    def mask(self, role: str) -> np.ndarray:
        r = self.role_ranges[role]
        return (self.split >= r.start) & (self.split < r.stop)


def make_splits(lat, lon, labels, n_splits: int = 50, seed: int = 0, cell_deg: float = 1.0) -> SplitAssignment:
    """Deal records round-robin into ``n_splits`` splits within (cell, label) strata.

    Strata are visited in sorted key order and the dealing pointer carries over
    from one stratum to the next, so both per-stratum and global split loads
    differ by at most one. The dealing order over split indices is a seeded
    permutation; roles are contiguous index blocks (train, then val, then test).
    """
    role_counts(n_splits)
    y = np.asarray(labels).astype(np.int64)
    n = len(y)
    cells = geo_cells(lat, lon, cell_deg) if n else np.zeros(0, dtype=np.int64)
    strata = cells * 2 + y
    rng = np.random.default_rng(seed)
    deal_order = rng.permutation(n_splits)
    split = np.empty(n, dtype=np.int64)
    pointer = 0
    for key in np.unique(strata):
        members = np.flatnonzero(strata == key)
        members = members[rng.permutation(len(members))]
        slots = (pointer + np.arange(len(members))) % n_splits
        split[members] = deal_order[slots]
        pointer = (pointer + len(members)) % n_splits
    return SplitAssignment(split=split, n_splits=n_splits, seed=seed)


def make_record_splits(records, n_splits: int = 50, seed: int = 0, cell_deg: float = 1.0) -> SplitAssignment:
    records = list(records)
    return make_splits(
        [r.point.lat for r in records], [r.point.lon for r in records],
        [r.label for r in records], n_splits, seed, cell_deg,
    )
