"""Hotspot density on a lat/lon grid, exported as CSV and a log-scaled grayscale image."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass
class DensityGrid:
    cell_deg: float
    counts: dict  # (lat_idx, lon_idx) -> count

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def image_array(self) -> np.ndarray:
        """uint8 image, north up, spanning the occupied cell range; 255 * log1p(c) / log1p(max)."""
        if not self.counts:
            return np.zeros((1, 1), dtype=np.uint8)
        keys = np.array(list(self.counts))
        r0, c0 = keys.min(axis=0)
        r1, c1 = keys.max(axis=0)
        grid = np.zeros((r1 - r0 + 1, c1 - c0 + 1))
        for (r, c), n in self.counts.items():
            grid[r1 - r, c - c0] = n
        scaled = 255.0 * np.log1p(grid) / math.log1p(grid.max())
        return np.round(scaled).astype(np.uint8)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lat_idx", "lon_idx", "count"])
            for (r, c), n in sorted(self.counts.items()):
                w.writerow([r, c, n])

    def write_image(self, path) -> None:
        Image.fromarray(self.image_array()).save(path)


def density_grid(hotspots, cell_deg: float, positives_only: bool = False) -> DensityGrid:
    """Count hotspots per cell; cell indices are floor((lat + 90) / d), floor((lon + 180) / d)."""
    if not cell_deg > 0:
        raise ValueError("cell_deg must be positive")
    pts = [h for h in hotspots if not positives_only or h.label == 1]
    if not pts:
        return DensityGrid(cell_deg, {})
    lat = np.array([h.point.lat for h in pts])
    lon = np.array([h.point.lon for h in pts])
    rows = np.floor((lat + 90.0) / cell_deg).astype(np.int64)
    cols = np.floor((lon + 180.0) / cell_deg).astype(np.int64)
    keys, counts = np.unique(np.stack([rows, cols], axis=1), axis=0, return_counts=True)
    return DensityGrid(cell_deg, {(int(r), int(c)): int(n) for (r, c), n in zip(keys, counts)})
