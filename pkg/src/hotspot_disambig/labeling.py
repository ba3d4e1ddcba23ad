"""Ground-truth labels from burned-area cross-referencing.

A burned area's reported end date is unreliable, so its end is re-estimated as
the first UTC day (from the reported start day on) with fewer than two
hotspots inside the perimeter, pooling all sensors. A hotspot is positive when
it falls inside some perimeter between the reported start and the end of the
estimated extinction day.
"""
from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass

import numpy as np

from .data.records import BurnedAreaRecord, day_start
from .geo import STIndex, TimeInterval

SEARCH_DAYS_AFTER_END = 30
MIN_DAILY_HOTSPOTS = 2


@dataclass
class LabelReport:
    labels: dict  # hotspot id -> 0/1
    estimated_end: dict  # area id -> date
    matched: dict  # area id -> number of hotspots inside its active window

    @property
    def positives(self) -> int:
        return sum(self.labels.values())

    @property
    def negatives(self) -> int:
        return len(self.labels) - self.positives

    @property
    def positive_fraction(self) -> float:
        return self.positives / len(self.labels) if self.labels else 0.0

    def summary(self) -> dict:
        return {
            "total": len(self.labels),
            "positives": self.positives,
            "negatives": self.negatives,
            "positive_fraction": self.positive_fraction,
            "estimated_end": {k: v.isoformat() for k, v in sorted(self.estimated_end.items())},
            "matched": dict(sorted(self.matched.items())),
        }


def daily_counts(area: BurnedAreaRecord, idx: STIndex) -> np.ndarray:
    """In-perimeter hotspot counts per UTC day from the reported start day to end + 30 days."""
    first = day_start(area.start_date)
    last_day = area.end_date + dt.timedelta(days=SEARCH_DAYS_AFTER_END)
    n_days = (last_day - area.start_date).days + 1
    window = TimeInterval(first, first + n_days * 86400 - 1)
    pos = idx.polygon_positions(area.geometry, window)
    return np.bincount((idx.t[pos] - first) // 86400, minlength=n_days)[:n_days]


def estimate_extinction_date(area: BurnedAreaRecord, idx: STIndex) -> dt.date:
    counts = daily_counts(area, idx)
    low = np.flatnonzero(counts < MIN_DAILY_HOTSPOTS)
    if len(low) == 0:
        return area.end_date
    return area.start_date + dt.timedelta(days=int(low[0]))


def with_extinction_dates(areas, idx: STIndex) -> list:
    return [dataclasses.replace(a, estimated_end=estimate_extinction_date(a, idx)) for a in areas]


def label_hotspots(hotspots, areas, idx: STIndex) -> LabelReport:
    """Label every hotspot; ``areas`` must already carry ``estimated_end``."""
    ids = np.fromiter((h.id for h in hotspots), dtype=np.int64, count=len(hotspots))
    found_all = [np.empty(0, dtype=np.int64)]
    matched = {}
    for area in areas:
        window = area.active_window()
        found = idx.ids[idx.polygon_positions(area.geometry, window)]
        matched[area.id] = int(len(found))
        found_all.append(found)
    flags = np.isin(ids, np.concatenate(found_all)).astype(np.int64)
    labels = dict(zip(ids.tolist(), flags.tolist()))
    return LabelReport(
        labels=labels,
        estimated_end={a.id: a.estimated_end for a in areas},
        matched=matched,
    )


def label_campaign(hotspots, areas, cell_deg: float = 0.1):
    """Index, estimate extinction dates and label in one call."""
    idx = STIndex.from_records(hotspots, cell_deg=cell_deg)
    areas = with_extinction_dates(areas, idx)
    return label_hotspots(hotspots, areas, idx), areas
