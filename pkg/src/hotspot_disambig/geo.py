"""Geometry primitives and a grid-backed spatio-temporal index over point records.

Coordinates are geographic degrees. Polygon containment is evaluated on raw
lon/lat as a planar even-odd test, which is adequate for regional burned-area
perimeters; polygons that straddle the antimeridian are refused.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

EARTH_RADIUS_M = 6_371_008.8
_EDGE_EPS = 1e-12


class AntimeridianError(ValueError):
    """Polygon ring crosses the antimeridian."""


class DuplicateIdError(ValueError):
    """Index build received the same record id twice."""


def _normalize_lon(lon: float) -> float:
    if -180.0 <= lon < 180.0:
        return lon  # in range already; avoid the modulo's rounding
    lon = ((lon + 180.0) % 360.0) - 180.0
    # float modulo can land exactly on 180 for tiny negative inputs
    return -180.0 if lon >= 180.0 else lon


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f"non-finite coordinate ({lat}, {lon})")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", _normalize_lon(lon))


@dataclass(frozen=True)
class TimeInterval:
    """Closed interval of UTC seconds."""

    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"interval start {self.start} after end {self.end}")

    def contains(self, t) -> bool:
        return self.start <= t <= self.end


def _ring_array(ring: Sequence[GeoPoint]) -> np.ndarray:
    pts = [(p.lon, p.lat) for p in ring]
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    if len(set(pts)) < 3:
        raise ValueError("polygon ring needs at least 3 distinct vertices")
    arr = np.asarray(pts, dtype=np.float64)
    dlon = np.abs(np.diff(np.vstack([arr, arr[:1]])[:, 0]))
    if np.any(dlon > 180.0):
        raise AntimeridianError("polygon ring crosses the antimeridian")
    return arr


@dataclass(frozen=True)
class PolygonGeom:
    """Exterior ring plus optional holes. Rings are closed implicitly."""

    exterior: tuple
    holes: tuple = ()
    _rings: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        exterior = tuple(self.exterior)
        holes = tuple(tuple(h) for h in self.holes)
        rings = (_ring_array(exterior),) + tuple(_ring_array(h) for h in holes)
        object.__setattr__(self, "exterior", exterior)
        object.__setattr__(self, "holes", holes)
        object.__setattr__(self, "_rings", rings)

    @classmethod
    def from_lonlat(cls, exterior, holes=()) -> "PolygonGeom":
        """Build from ``[(lon, lat), ...]`` sequences (GeoJSON position order)."""
        ext = [GeoPoint(lat, lon) for lon, lat in exterior]
        hs = [[GeoPoint(lat, lon) for lon, lat in h] for h in holes]
        return cls(tuple(ext), tuple(tuple(h) for h in hs))

    @property
    def bbox(self):
        """(min_lon, min_lat, max_lon, max_lat) of the exterior ring."""
        ext = self._rings[0]
        return (ext[:, 0].min(), ext[:, 1].min(), ext[:, 0].max(), ext[:, 1].max())

    def lonlat_rings(self):
        return [r.tolist() for r in self._rings]


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in metres on the mean-radius sphere."""
    return float(haversine_array(a.lat, a.lon, b.lat, b.lon))


def haversine_array(lat1, lon1, lat2, lon2):
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(v, dtype=np.float64)) for v in (lat1, lon1, lat2, lon2))
    s = np.sin((lat2 - lat1) / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(s, 0.0, 1.0)))


def _ring_crossings(x, y, ring):
    """Return (inside_even_odd, on_boundary) for arrays of points against one ring."""
    inside = np.zeros(x.shape, dtype=bool)
    on_edge = np.zeros(x.shape, dtype=bool)
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        # boundary: collinear and within the segment's bounding box
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        scale = max(abs(x2 - x1), abs(y2 - y1), 1.0)
        within = (
            (x >= min(x1, x2) - _EDGE_EPS) & (x <= max(x1, x2) + _EDGE_EPS)
            & (y >= min(y1, y2) - _EDGE_EPS) & (y <= max(y1, y2) + _EDGE_EPS)
        )
        on_edge |= within & (np.abs(cross) <= _EDGE_EPS * scale)
        if y1 == y2:
            continue
        straddle = (y1 > y) != (y2 > y)
        x_int = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= straddle & (x < x_int)
    return inside, on_edge


def points_in_polygon(lat, lon, poly: PolygonGeom) -> np.ndarray:
    """Vectorised even-odd containment; boundary points are inside, holes subtract."""
    x = np.asarray(lon, dtype=np.float64)
    y = np.asarray(lat, dtype=np.float64)
    inside, boundary = _ring_crossings(x, y, poly._rings[0])
    for hole in poly._rings[1:]:
        in_hole, on_hole = _ring_crossings(x, y, hole)
        inside &= ~in_hole
        boundary |= on_hole
    return inside | boundary


def point_in_polygon(p: GeoPoint, poly: PolygonGeom) -> bool:
    return bool(points_in_polygon(np.array([p.lat]), np.array([p.lon]), poly)[0])


Polygonal = Union[PolygonGeom, Sequence[PolygonGeom]]


def _parts(poly: Polygonal) -> list:
    return [poly] if isinstance(poly, PolygonGeom) else list(poly)


class STIndex:
    """Immutable point index: uniform lat/lon grid, records sorted by (cell, time).

    Each record gets a composite int64 key ``cell << 32 | (t - t0)`` so that the
    slice of a cell between two timestamps is found with two binary searches,
    vectorised over every candidate cell of a query.
    """

    def __init__(self, ids, lat, lon, t, cell_deg: float = 0.1):
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        lat = np.asarray(lat, dtype=np.float64).reshape(-1)
        lon = np.asarray(lon, dtype=np.float64).reshape(-1)
        t = np.asarray(t, dtype=np.int64).reshape(-1)
        if not (len(ids) == len(lat) == len(lon) == len(t)):
            raise ValueError("ids, lat, lon and t must have equal length")
        if cell_deg <= 0:
            raise ValueError("cell_deg must be positive")
        if len(np.unique(ids)) != len(ids):
            uniq, counts = np.unique(ids, return_counts=True)
            raise DuplicateIdError(f"duplicate record ids: {uniq[counts > 1][:10].tolist()}")

        self.cell_deg = float(cell_deg)
        self._n_rows = int(math.ceil(180.0 / cell_deg)) + 1
        self._n_cols = int(math.ceil(360.0 / cell_deg)) + 1
        if self._n_rows * self._n_cols >= 2**31:
            raise ValueError(f"cell_deg {cell_deg} too fine for the composite key")
        self._t0 = int(t.min()) if len(t) else 0
        if len(t) and int(t.max()) - self._t0 >= 2**32:
            raise ValueError("time span exceeds the index's 2**32 s range")

        cells = self._row(lat) * self._n_cols + self._col(lon)
        comp = (cells << 32) | (t - self._t0)
        order = np.argsort(comp, kind="stable")
        self._comp = comp[order]
        self.ids = ids[order]
        self.lat = lat[order]
        self.lon = lon[order]
        self.t = t[order]
        self._cells = np.unique(cells)
        for arr in (self._comp, self.ids, self.lat, self.lon, self.t, self._cells):
            arr.setflags(write=False)

    @classmethod
    def from_records(cls, records: Iterable, cell_deg: float = 0.1) -> "STIndex":
        """Build from objects with ``id``, ``point`` and ``time`` attributes."""
        records = list(records)
        return cls(
            [r.id for r in records],
            [r.point.lat for r in records],
            [r.point.lon for r in records],
            [r.time for r in records],
            cell_deg=cell_deg,
        )

    def __len__(self):
        return len(self.ids)

    def _row(self, lat):
        return np.floor((np.asarray(lat) + 90.0) / self.cell_deg).astype(np.int64)

    def _col(self, lon):
        return np.floor((np.asarray(lon) + 180.0) / self.cell_deg).astype(np.int64)

    def _candidates(self, min_lat, max_lat, min_lon, max_lon, t: TimeInterval) -> np.ndarray:
        """Positions of records in the bbox cells whose time lies in ``t``."""
        if len(self.ids) == 0:
            return np.empty(0, dtype=np.int64)
        r0, r1 = self._row(max(min_lat, -90.0)), self._row(min(max_lat, 90.0))
        c0, c1 = self._col(max(min_lon, -180.0)), self._col(min(max_lon, 180.0))
        n_cand = (r1 - r0 + 1) * (c1 - c0 + 1)
        if n_cand <= len(self._cells):
            rows = np.arange(r0, r1 + 1, dtype=np.int64)
            cols = np.arange(c0, c1 + 1, dtype=np.int64)
            cells = (rows[:, None] * self._n_cols + cols[None, :]).ravel()
        else:
            rows, cols = self._cells // self._n_cols, self._cells % self._n_cols
            cells = self._cells[(rows >= r0) & (rows <= r1) & (cols >= c0) & (cols <= c1)]
        lo_t = min(max(t.start - self._t0, 0), 2**32 - 1)
        hi_t = t.end - self._t0
        if hi_t < 0 or t.start - self._t0 > 2**32 - 1:
            return np.empty(0, dtype=np.int64)
        hi_t = min(hi_t, 2**32 - 1)
        lo = np.searchsorted(self._comp, (cells << 32) | lo_t, side="left")
        hi = np.searchsorted(self._comp, (cells << 32) | hi_t, side="right")
        keep = hi > lo
        lo, hi = lo[keep], hi[keep]
        if len(lo) == 0:
            return np.empty(0, dtype=np.int64)
        lengths = hi - lo
        offsets = np.repeat(lo - np.concatenate(([0], np.cumsum(lengths)[:-1])), lengths)
        return np.arange(lengths.sum(), dtype=np.int64) + offsets

    def radius_positions(self, center: GeoPoint, radius: float, t: TimeInterval) -> np.ndarray:
        if radius < 0:
            raise ValueError("radius must be non-negative")
        dlat = math.degrees(radius / EARTH_RADIUS_M) * (1.0 + 1e-9) + 1e-12
        lat_lo, lat_hi = center.lat - dlat, center.lat + dlat
        if lat_hi >= 90.0 or lat_lo <= -90.0:
            lon_lo, lon_hi = -180.0, 180.0
        else:
            max_abs_lat = max(abs(lat_lo), abs(lat_hi))
            dlon = dlat / math.cos(math.radians(max_abs_lat))
            lon_lo, lon_hi = center.lon - dlon, center.lon + dlon
        if lon_hi - lon_lo >= 360.0:
            ranges = [(-180.0, 180.0)]
        elif lon_lo < -180.0:
            ranges = [(-180.0, lon_hi), (lon_lo + 360.0, 180.0)]
        elif lon_hi >= 180.0:
            ranges = [(lon_lo, 180.0), (-180.0, lon_hi - 360.0)]
        else:
            ranges = [(lon_lo, lon_hi)]
        parts = [self._candidates(lat_lo, lat_hi, a, b, t) for a, b in ranges]
        cand = parts[0] if len(parts) == 1 else np.unique(np.concatenate(parts))
        if len(cand) == 0:
            return cand
        d = haversine_array(center.lat, center.lon, self.lat[cand], self.lon[cand])
        return cand[d <= radius]

    def polygon_positions(self, poly: Polygonal, t: TimeInterval) -> np.ndarray:
        out = []
        for part in _parts(poly):
            min_lon, min_lat, max_lon, max_lat = part.bbox
            cand = self._candidates(min_lat, max_lat, min_lon, max_lon, t)
            if len(cand):
                out.append(cand[points_in_polygon(self.lat[cand], self.lon[cand], part)])
        if not out:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(out))


def build_st_index(records: Sequence, cell_deg: float = 0.1) -> STIndex:
    """Index ``(id, GeoPoint, timestamp)`` triples."""
    records = list(records)
    return STIndex(
        [r[0] for r in records],
        [r[1].lat for r in records],
        [r[1].lon for r in records],
        [r[2] for r in records],
        cell_deg=cell_deg,
    )


def query_radius_time(idx: STIndex, center: GeoPoint, radius: float, t: TimeInterval) -> set:
    return set(idx.ids[idx.radius_positions(center, radius, t)].tolist())


def query_polygon_time(idx: STIndex, poly: Polygonal, t: TimeInterval) -> set:
    return set(idx.ids[idx.polygon_positions(poly, t)].tolist())
