from __future__ import annotations

import datetime as dt
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..geo import GeoPoint, PolygonGeom, TimeInterval

BAND_NAMES = ("t_21", "t_31", "t_m13", "t_m15", "t_i4", "t_i5")

PATCH_SIZE = 32
PATCH_CHANNELS = 33
S3_CHANNELS = 32
LULC_CHANNEL = 32
PIXEL_SIZE_M = 300.0
MIN_BURNED_AREA_HA = 30.0

# class codes of the annual 9-class land-cover map
LULC_CLASSES = {
    1: "water",
    2: "trees",
    3: "flooded_vegetation",
    4: "crops",
    5: "built_area",
    6: "bare_ground",
    7: "snow_ice",
    8: "clouds",
    9: "rangeland",
}


class Sensor(str, enum.Enum):
    MODIS = "MODIS"
    VIIRS750 = "VIIRS750"
    VIIRS375 = "VIIRS375"


SENSOR_BANDS = {
    Sensor.MODIS: ("t_21", "t_31"),
    Sensor.VIIRS750: ("t_m13", "t_m15"),
    Sensor.VIIRS375: ("t_i4", "t_i5"),
}


class RecordValidationError(ValueError):
    pass


@dataclass(frozen=True)
class HotspotRecord:
    id: int
    point: GeoPoint
    time: int
    sensor: Sensor
    frp: Optional[float] = None
    bands: dict = field(default_factory=dict)
    confidence: Optional[float] = None
    label: Optional[int] = None

    def __post_init__(self):
        sensor = Sensor(self.sensor)
        object.__setattr__(self, "sensor", sensor)
        if self.id < 0 or self.id >= 2**63:
            raise RecordValidationError(f"id {self.id} outside the supported range")
        allowed = SENSOR_BANDS[sensor]
        bad = sorted(k for k in self.bands if k not in allowed)
        if bad:
            raise RecordValidationError(f"{sensor.value} record carries bands {bad}; allowed {list(allowed)}")
        for k, v in self.bands.items():
            if not math.isfinite(v):
                raise RecordValidationError(f"band {k} is not finite")
        if self.frp is not None and not self.frp >= 0:
            raise RecordValidationError(f"frp {self.frp} must be >= 0")
        if self.confidence is not None and not 0 <= self.confidence <= 100:
            raise RecordValidationError(f"confidence {self.confidence} outside [0, 100]")
        if self.label not in (None, 0, 1):
            raise RecordValidationError(f"label {self.label} must be 0 or 1")


def day_start(d: dt.date) -> int:
    return int(dt.datetime(d.year, d.month, d.day, tzinfo=dt.timezone.utc).timestamp())


def day_end(d: dt.date) -> int:
    return day_start(d) + 86_399


def utc_date(t: int) -> dt.date:
    return dt.datetime.fromtimestamp(int(t), tz=dt.timezone.utc).date()


@dataclass(frozen=True)
class BurnedAreaRecord:
    id: str
    geometry: tuple  # of PolygonGeom, one per part
    reported: TimeInterval
    area_ha: float
    estimated_end: Optional[dt.date] = None

    def __post_init__(self):
        parts = (self.geometry,) if isinstance(self.geometry, PolygonGeom) else tuple(self.geometry)
        if not parts:
            raise RecordValidationError(f"burned area {self.id} has no geometry")
        object.__setattr__(self, "geometry", parts)
        if not self.area_ha >= MIN_BURNED_AREA_HA:
            raise RecordValidationError(f"burned area {self.id}: area_ha {self.area_ha} below {MIN_BURNED_AREA_HA}")

    @property
    def start_date(self) -> dt.date:
        return utc_date(self.reported.start)

    @property
    def end_date(self) -> dt.date:
        return utc_date(self.reported.end)

    def active_window(self) -> TimeInterval:
        if self.estimated_end is None:
            raise ValueError(f"burned area {self.id} has no estimated_end; run estimate_extinction_date first")
        return TimeInterval(self.reported.start, day_end(self.estimated_end))


@dataclass(eq=False)
class RasterPatch:
    """32x32x33 float32 grid (rows, cols, channels) centred on a hotspot.

    ``filled`` marks patches whose missing pixels were replaced at ingestion;
    it is in-memory metadata and is not written to the patch store.
    """

    hotspot_id: int
    values: np.ndarray
    filled: bool = False

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (PATCH_SIZE, PATCH_SIZE, PATCH_CHANNELS):
            raise RecordValidationError(f"patch shape {v.shape} != {(PATCH_SIZE, PATCH_SIZE, PATCH_CHANNELS)}")
        v = v.astype(np.float32, copy=False)
        if np.isnan(v).any():
            raise RecordValidationError("patch contains NaN; fill gaps with ingest_patch first")
        lc = v[:, :, LULC_CHANNEL]
        if np.any((lc < 1) | (lc > 9) | (lc != np.round(lc))):
            raise RecordValidationError("land-cover channel must hold integer class codes 1..9")
        self.values = v

    def __eq__(self, other):
        if not isinstance(other, RasterPatch):
            return NotImplemented
        return self.hotspot_id == other.hotspot_id and self.values.tobytes() == other.values.tobytes()

    @property
    def center(self) -> np.ndarray:
        return self.values[PATCH_SIZE // 2, PATCH_SIZE // 2, :]


def ingest_patch(hotspot_id: int, values, channel_means) -> RasterPatch:
    """Replace NaN Sentinel-3 pixels with per-channel scene means and flag the patch."""
    v = np.array(values, dtype=np.float32)
    gaps = np.isnan(v)
    if gaps[:, :, LULC_CHANNEL].any():
        raise RecordValidationError("land-cover channel may not contain gaps")
    filled = bool(gaps.any())
    if filled:
        means = np.broadcast_to(np.asarray(channel_means, dtype=np.float32), v.shape)
        v[gaps] = means[gaps]
    return RasterPatch(hotspot_id, v, filled=filled)
