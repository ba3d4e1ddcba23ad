import datetime as dt

import numpy as np
import pytest

from hotspot_disambig.data import BurnedAreaRecord, HotspotRecord, Sensor
from hotspot_disambig.data.records import day_end, day_start
from hotspot_disambig.geo import GeoPoint, PolygonGeom, TimeInterval

T0 = day_start(dt.date(2021, 7, 1))


def make_hotspot(hid, lat, lon, t, sensor=Sensor.MODIS, label=None, **kw):
    return HotspotRecord(id=hid, point=GeoPoint(lat, lon), time=int(t), sensor=sensor, label=label, **kw)


def square(lon0, lat0, size, holes=()):
    ring = [(lon0, lat0), (lon0 + size, lat0), (lon0 + size, lat0 + size), (lon0, lat0 + size)]
    return PolygonGeom.from_lonlat(ring, holes)


def make_area(aid, geom, start: dt.date, end: dt.date, area_ha=100.0, estimated_end=None):
    return BurnedAreaRecord(
        id=aid,
        geometry=geom,
        reported=TimeInterval(day_start(start), day_end(end)),
        area_ha=area_ha,
        estimated_end=estimated_end,
    )


def random_scene(rng, n_hotspots, n_areas, region=(40.0, 42.0, 10.0, 12.0), n_days=20):
    """Random hotspots and random convex-ish burned areas with mixed holes / multipart."""
    lat0, lat1, lon0, lon1 = region
    start = dt.date(2021, 7, 1)
    hotspots = [
        make_hotspot(i + 1, rng.uniform(lat0, lat1), rng.uniform(lon0, lon1),
                     T0 + int(rng.integers(0, n_days * 86400)))
        for i in range(n_hotspots)
    ]
    areas = []
    for k in range(n_areas):
        parts, burst = [], []
        for _ in range(1 + (rng.random() < 0.2)):
            clat, clon = rng.uniform(lat0, lat1), rng.uniform(lon0, lon1)
            r = rng.uniform(0.02, 0.15)
            k_vert = int(rng.integers(5, 10))
            # jittered but evenly spread angles keep the ring simple and around the centre
            angles = (np.arange(k_vert) + rng.uniform(0, 0.5, size=k_vert)) * 2 * np.pi / k_vert
            radii = r * rng.uniform(0.5, 1.0, size=len(angles))
            ring = [(clon + a * np.cos(t), clat + a * np.sin(t)) for a, t in zip(radii, angles)]
            holes = []
            if rng.random() < 0.3:
                hr = 0.1 * radii.min()
                holes = [[(clon - hr, clat - hr), (clon + hr, clat - hr), (clon + hr, clat + hr), (clon - hr, clat + hr)]]
            parts.append(PolygonGeom.from_lonlat(ring, holes))
            burst.append((clat, clon + 0.2 * radii.min()))
        s = start + dt.timedelta(days=int(rng.integers(0, n_days - 3)))
        e = s + dt.timedelta(days=int(rng.integers(0, 5)))
        areas.append(make_area(f"a{k}", tuple(parts), s, e))
        # a burst of detections inside the first part over a few days from the start
        blat, blon = burst[0]
        for d in range(int(rng.integers(0, 6))):
            for _ in range(int(rng.integers(0, 5))):
                hotspots.append(make_hotspot(
                    len(hotspots) + 1, blat + rng.normal(0, 1e-3), blon + rng.normal(0, 1e-3),
                    day_start(s) + d * 86400 + int(rng.integers(0, 86400)),
                ))
    return hotspots, areas


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
