"""Per-hotspot feature vectors and the six ablation feature sets.

Block order is fixed: sensor | time | land_cover | sentinel3 | nph.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .data.records import BAND_NAMES, LULC_CHANNEL, S3_CHANNELS, HotspotRecord, RasterPatch
from .geo import STIndex, TimeInterval

NPH_WINDOWS_H = (12, 24, 36)
NPH_RADIUS_M = 1000.0
WEEK_S = 7 * 86400
DAY_S = 86400
# 1970-01-05 00:00 UTC was a Monday
_MONDAY_EPOCH = 4 * DAY_S

SENSOR_VALUES = ("frp",) + BAND_NAMES
BLOCK_NAMES = {
    "sensor": SENSOR_VALUES + tuple(f"has_{n}" for n in SENSOR_VALUES),
    "time": ("week_sin", "week_cos", "day_sin", "day_cos"),
    "land_cover": tuple(f"lulc_{c}" for c in range(1, 10)),
    "sentinel3": tuple(f"s3_{c:02d}" for c in range(S3_CHANNELS)),
    "nph": tuple(f"nph_{w}h" for w in NPH_WINDOWS_H),
}
BLOCK_ORDER = ("sensor", "time", "land_cover", "sentinel3", "nph")
_FLAG_TO_BLOCK = {
    "modis_viirs": "sensor",
    "time": "time",
    "land_cover": "land_cover",
    "sentinel3": "sentinel3",
    "nph": "nph",
}


@dataclass(frozen=True)
class FeatureSetConfig:
    name: str = "custom"
    modis_viirs: bool = False
    time: bool = False
    land_cover: bool = False
    sentinel3: bool = False
    nph: bool = False

    @property
    def blocks(self) -> tuple:
        return tuple(block for flag, block in _FLAG_TO_BLOCK.items() if getattr(self, flag))

    @property
    def needs_patch(self) -> bool:
        return self.land_cover or self.sentinel3

    @property
    def names(self) -> tuple:
        return tuple(n for b in self.blocks for n in BLOCK_NAMES[b])

    @property
    def dim(self) -> int:
        return len(self.names)

    @classmethod
    def parse(cls, spec) -> "FeatureSetConfig":
        """Accept a preset name ("FS1".."FS6") or a dict of block flags."""
        if isinstance(spec, FeatureSetConfig):
            return spec
        if isinstance(spec, str):
            try:
                return FEATURE_SETS[spec.upper()]
            except KeyError:
                raise ValueError(f"unknown feature set {spec!r}; expected one of {sorted(FEATURE_SETS)}") from None
        if isinstance(spec, dict):
            unknown = set(spec) - set(_FLAG_TO_BLOCK) - {"name"}
            if unknown:
                raise ValueError(f"unknown feature-set flags {sorted(unknown)}")
            return cls(**{"name": "custom", **spec})
        raise TypeError(f"cannot interpret feature set {spec!r}")


FEATURE_SETS = {
    "FS1": FeatureSetConfig("FS1", modis_viirs=True, time=True),
    "FS2": FeatureSetConfig("FS2", modis_viirs=True, time=True, land_cover=True),
    "FS3": FeatureSetConfig("FS3", modis_viirs=True, time=True, land_cover=True, sentinel3=True),
    "FS4": FeatureSetConfig("FS4", modis_viirs=True, time=True, land_cover=True, sentinel3=True, nph=True),
    "FS5": FeatureSetConfig("FS5", time=True, land_cover=True, sentinel3=True, nph=True),
    "FS6": FeatureSetConfig("FS6", land_cover=True, sentinel3=True),
}
ALL_FEATURES = FEATURE_SETS["FS4"]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    names: tuple

    def __len__(self):
        return len(self.values)


def compute_nph(idx: STIndex, h: HotspotRecord, radius_m: float = NPH_RADIUS_M) -> tuple:
    """Hotspots within ``radius_m`` in the 12/24/36 h before ``h`` (excluding ``h``)."""
    longest = max(NPH_WINDOWS_H) * 3600
    # times are whole seconds, so "strictly before" is an inclusive end at t - 1
    window = TimeInterval(h.time - longest, h.time - 1)
    pos = idx.radius_positions(h.point, radius_m, window)
    pos = pos[idx.ids[pos] != h.id]
    lag = h.time - idx.t[pos]
    return tuple(int(np.count_nonzero(lag <= w * 3600)) for w in NPH_WINDOWS_H)


def compute_time_features(t: int) -> np.ndarray:
    week = ((int(t) - _MONDAY_EPOCH) % WEEK_S) / WEEK_S
    day = (int(t) % DAY_S) / DAY_S
    return np.array([
        math.sin(2 * math.pi * week), math.cos(2 * math.pi * week),
        math.sin(2 * math.pi * day), math.cos(2 * math.pi * day),
    ])


def encode_lulc(class_code: int) -> np.ndarray:
    code = int(class_code)
    if code != class_code or not 1 <= code <= 9:
        raise ValueError(f"land-cover class code {class_code} outside 1..9")
    out = np.zeros(9)
    out[code - 1] = 1.0
    return out


def sensor_block(h: HotspotRecord) -> np.ndarray:
    vals = [h.frp] + [h.bands.get(b) for b in BAND_NAMES]
    return np.array([0.0 if v is None else float(v) for v in vals]
                    + [0.0 if v is None else 1.0 for v in vals])


def assemble_features(
    h: HotspotRecord,
    fs: FeatureSetConfig,
    patch: Optional[RasterPatch] = None,
    nph: Optional[tuple] = None,
) -> FeatureVector:
    if fs.needs_patch and patch is None:
        raise ValueError(f"feature set {fs.name} needs a raster patch for hotspot {h.id}")
    if fs.nph and nph is None:
        raise ValueError(f"feature set {fs.name} needs NPH counts for hotspot {h.id}")
    parts = []
    for block in fs.blocks:
        if block == "sensor":
            parts.append(sensor_block(h))
        elif block == "time":
            parts.append(compute_time_features(h.time))
        elif block == "land_cover":
            parts.append(encode_lulc(patch.center[LULC_CHANNEL]))
        elif block == "sentinel3":
            parts.append(patch.center[:S3_CHANNELS].astype(np.float64))
        else:
            parts.append(np.asarray(nph, dtype=np.float64))
    values = np.concatenate(parts) if parts else np.zeros(0)
    return FeatureVector(values, fs.names)


def feature_matrix(hotspots, fs: FeatureSetConfig, patches=None, idx: STIndex = None):
    """Stack feature vectors for many hotspots; returns (X, names).

    ``patches`` is any mapping from hotspot id to RasterPatch. When NPH is
    needed and no index is given, one is built over ``hotspots``.
    """
    if fs.nph and idx is None:
        idx = STIndex.from_records(hotspots)
    rows = []
    for h in hotspots:
        patch = patches[h.id] if fs.needs_patch else None
        nph = compute_nph(idx, h) if fs.nph else None
        rows.append(assemble_features(h, fs, patch, nph).values)
    X = np.vstack(rows) if rows else np.zeros((0, fs.dim))
    return X, fs.names


def select_columns(X, names, fs: FeatureSetConfig):
    """Restrict a wider feature matrix to the columns of ``fs``, in block order."""
    pos = {n: i for i, n in enumerate(names)}
    missing = [n for n in fs.names if n not in pos]
    if missing:
        raise ValueError(f"feature matrix lacks columns {missing[:5]} needed by {fs.name}")
    cols = [pos[n] for n in fs.names]
    return np.asarray(X)[:, cols], fs.names


def write_feature_csv(path, ids, X, names, labels=None) -> None:
    """One row per hotspot: id, feature columns, then label when given."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *names] + (["label"] if labels is not None else []))
        for i, row in enumerate(np.asarray(X)):
            tail = [int(labels[i])] if labels is not None else []
            w.writerow([int(ids[i]), *(repr(float(v)) for v in row)] + tail)


def read_feature_csv(path):
    """(ids, X, names, labels or None) from a file written by write_feature_csv."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["id"]:
        raise ValueError(f"{path}: not a feature table (header must start with 'id')")
    header = rows[0]
    has_label = header[-1] == "label"
    names = tuple(header[1:-1] if has_label else header[1:])
    body = rows[1:]
    try:
        ids = np.array([int(r[0]) for r in body], dtype=np.int64)
        X = np.array([[float(v) for v in r[1:1 + len(names)]] for r in body]).reshape(len(body), len(names))
        labels = np.array([int(r[-1]) for r in body], dtype=np.int64) if has_label else None
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed feature row ({exc})") from None
    return ids, X, names, labels
