"""Independent reference implementations used as test oracles.

Each one is a deliberately naive re-derivation (scalar loops, shapely for
geometry, the math module for trigonometry) that shares no code with the
package beyond the record types.
"""
from __future__ import annotations

import datetime as dt
import math

import numpy as np
from shapely import Point, Polygon

R_EARTH = 6371008.8


def haversine_m(lat1, lon1, lat2, lon2) -> float:
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * R_EARTH * math.asin(min(1.0, math.sqrt(a)))


def shapely_parts(area_geometry) -> list:
    return [Polygon(p.lonlat_rings()[0], p.lonlat_rings()[1:]) for p in area_geometry]


def covered(parts, lat, lon) -> bool:
    pt = Point(lon, lat)
    return any(part.covers(pt) for part in parts)


def brute_extinction(area, hotspots) -> dt.date:
    parts = shapely_parts(area.geometry)
    per_day = {}
    for h in hotspots:
        if h.time >= area.reported.start and covered(parts, h.point.lat, h.point.lon):
            hd = dt.datetime.fromtimestamp(h.time, tz=dt.timezone.utc).date()
            per_day[hd] = per_day.get(hd, 0) + 1
    day = area.start_date
    last = area.end_date + dt.timedelta(days=30)
    while day <= last:
        if per_day.get(day, 0) < 2:
            return day
        day += dt.timedelta(days=1)
    return area.end_date


def brute_labels(hotspots, areas) -> dict:
    """O(N * M) join: positive iff inside some area's polygon during its active window."""
    labels = {}
    shapes = [(shapely_parts(a.geometry), a.reported.start,
               int(dt.datetime(a.estimated_end.year, a.estimated_end.month, a.estimated_end.day,
                               tzinfo=dt.timezone.utc).timestamp()) + 86399) for a in areas]
    for h in hotspots:
        labels[h.id] = int(any(
            t0 <= h.time <= t1 and covered(parts, h.point.lat, h.point.lon) for parts, t0, t1 in shapes
        ))
    return labels


def brute_nph(hotspots, radius_m=1000.0, windows_h=(12, 24, 36)) -> dict:
    out = {}
    for h in hotspots:
        counts = [0] * len(windows_h)
        for o in hotspots:
            if o.id == h.id or o.time >= h.time:
                continue
            if haversine_m(h.point.lat, h.point.lon, o.point.lat, o.point.lon) > radius_m:
                continue
            for k, w in enumerate(windows_h):
                if h.time - o.time <= w * 3600:
                    counts[k] += 1
        out[h.id] = tuple(counts)
    return out


def keys_weight(x, a=-0.5) -> float:
    x = abs(x)
    if x <= 1:
        return (a + 2) * x**3 - (a + 3) * x**2 + 1
    if x < 2:
        return a * x**3 - 5 * a * x**2 + 8 * a * x - 4 * a
    return 0.0


def bicubic_direct(grid, factor: int) -> np.ndarray:
    """Direct 16-tap summation per output pixel with edge clamping."""
    h, w = grid.shape
    out = np.zeros((h * factor, w * factor))
    for u in range(h * factor):
        y = (u + 0.5) / factor - 0.5
        y0 = math.floor(y)
        for v in range(w * factor):
            x = (v + 0.5) / factor - 0.5
            x0 = math.floor(x)
            acc = 0.0
            for i in range(y0 - 1, y0 + 3):
                wy = keys_weight(y - i)
                for j in range(x0 - 1, x0 + 3):
                    acc += wy * keys_weight(x - j) * grid[min(max(i, 0), h - 1), min(max(j, 0), w - 1)]
            out[u, v] = acc
    return out


def tally(y_true, y_pred):
    tp = fp = fn = tn = 0
    for t, p in zip(y_true, y_pred):
        if t and p:
            tp += 1
        elif p:
            fp += 1
        elif t:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def central_diff(f, params: dict, key: str, coords, eps: float) -> np.ndarray:
    """Central finite differences of scalar ``f()`` w.r.t. selected flat coordinates of params[key]."""
    arr = params[key]
    flat = arr.reshape(-1)
    out = np.empty(len(coords))
    for n, c in enumerate(coords):
        old = flat[c]
        flat[c] = old + eps
        fp = f()
        flat[c] = old - eps
        fm = f()
        flat[c] = old
        out[n] = (fp - fm) / (2 * eps)
    return out
