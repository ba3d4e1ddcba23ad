"""Synthetic hotspot campaigns with known ground truth.

A scene plants burned-area polygons with active windows and fills them with
positive hotspots; negatives come from persistent industrial heat sources,
sun glint over water and isolated clutter, all kept outside every polygon.
Sensor values, Sentinel-3 patches and land cover carry class-dependent but
overlapping signal, so each feature block adds partial information.
"""
from __future__ import annotations

import dataclasses
import datetime as dt
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..geo import GeoPoint, PolygonGeom, TimeInterval
from .raster import bicubic_upsample
from .records import (
    LULC_CHANNEL, PATCH_CHANNELS, PATCH_SIZE, S3_CHANNELS, BurnedAreaRecord, HotspotRecord,
    RasterPatch, Sensor, day_end, day_start, ingest_patch,
)

KINDS = ("fire", "industrial", "glint", "clutter")
KM_PER_DEG_LAT = 110.574
KM_PER_DEG_LON_EQ = 111.320

# channel layout of the synthetic Sentinel-3 block
SLSTR_CHANNELS = range(0, 11)
FIRE_CHANNELS = (9, 10)
THERMAL_CHANNELS = (7, 8)
VISIBLE_CHANNELS = (0, 1, 2, 3)
SMOKE_CHANNELS = (11, 12, 13, 14)
SCAR_CHANNELS = (27, 28, 29, 30, 31)

# per-kind sensor distributions: (t_mwir mean, t_lwir mean) in kelvin, log-FRP median
_SENSOR_PROFILE = {
    "fire": (336.0, 302.0, math.log(25.0)),
    "industrial": (346.0, 297.0, math.log(55.0)),
    "glint": (322.0, 291.0, math.log(7.0)),
    "clutter": (318.0, 296.0, math.log(6.0)),
}
_LULC_PRIOR = {
    "fire": {2: 0.4, 9: 0.3, 4: 0.2, 6: 0.05, 5: 0.05},
    "industrial": {5: 0.45, 6: 0.25, 4: 0.15, 9: 0.15},
    "glint": {1: 0.85, 3: 0.15},
    "clutter": {4: 0.25, 9: 0.2, 2: 0.15, 5: 0.15, 6: 0.15, 1: 0.05, 3: 0.02, 7: 0.01, 8: 0.02},
}
# UTC overpass hours per sensor; daytime passes listed first
_OVERPASS = {
    Sensor.MODIS: ((10, 12), (0, 21)),
    Sensor.VIIRS750: ((12,), (1,)),
    Sensor.VIIRS375: ((12,), (1,)),
}


class InfeasibleSceneError(ValueError):
    pass


@dataclass(frozen=True)
class SceneConfig:
    n_points: int = 2000
    n_fires: int = 10
    positive_fraction: float = 0.10
    industrial_fraction: float = 0.35  # of negatives
    glint_fraction: float = 0.15  # of negatives
    n_industrial_sites: int = 3
    region: tuple = (36.0, 44.0, -6.0, 20.0)  # lat_min, lat_max, lon_min, lon_max
    start_date: str = "2019-06-01"
    n_days: int = 60
    fire_radius_km: tuple = (2.0, 5.0)
    max_fire_days: int = 5
    s3_signal: float = 3.0
    smoke_signal: float = 0.35
    sensor_noise: float = 1.0
    cloud_fraction: float = 0.02
    missing_fraction: float = 0.03

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown scene parameters: {sorted(unknown)}")
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}


@dataclass
class SyntheticTruth:
    labels: dict  # hotspot id -> 0/1
    kinds: dict  # hotspot id -> kind name
    fires: list  # (area id, first active date, active days)
    seed: int
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "config": self.config,
            "labels": {str(k): v for k, v in self.labels.items()},
            "kinds": {str(k): v for k, v in self.kinds.items()},
            "fires": [[a, d.isoformat(), n] for a, d, n in self.fires],
        }


def n_positives(cfg: SceneConfig) -> int:
    """Positive count: round-half-up of positive_fraction * n_points."""
    return int(math.floor(cfg.positive_fraction * cfg.n_points + 0.5))


def _lulc_spectra() -> np.ndarray:
    # fixed reflectance-like signature per class over the 21 OLCI channels
    rng = np.random.default_rng(20160216)
    spectra = rng.normal(0.0, 1.0, size=(10, 21))
    spectra[[2, 3, 4, 9], 16:] += 2.0  # vegetated classes bright in the NIR end
    spectra[1, :] -= 1.5  # water dark
    return spectra


_SPECTRA = _lulc_spectra()
_SLSTR_BASE = np.linspace(-1.0, 1.0, 11)


def channel_means() -> np.ndarray:
    """Nominal scene mean per Sentinel-3 channel, used to fill cloud gaps."""
    means = np.zeros(PATCH_CHANNELS, dtype=np.float32)
    means[:11] = _SLSTR_BASE
    means[11:32] = _SPECTRA[1:].mean(axis=0)
    means[LULC_CHANNEL] = np.nan
    return means


class SyntheticPatches(Mapping):
    """Lazily generated patches keyed by hotspot id; generation is seeded per id."""

    def __init__(self, seed: int, params: dict, cloud_fraction: float):
        self._seed = seed
        self._params = params  # id -> (kind, lulc, heat, smoke)
        self._cloud_fraction = cloud_fraction
        self._means = channel_means()

    def __len__(self):
        return len(self._params)

    def __iter__(self):
        return iter(self._params)

    def __getitem__(self, hid) -> RasterPatch:
        kind, lulc, heat, smoke = self._params[hid]
        rng = np.random.default_rng((self._seed, 7, int(hid)))
        values = np.empty((PATCH_SIZE, PATCH_SIZE, PATCH_CHANNELS), dtype=np.float64)

        # SLSTR: 12x12 at ~1 km, upsampled x3, coarse pixel (6, 6) lands on (16, 16)
        coarse = _SLSTR_BASE[None, None, :] + rng.normal(0.0, 0.5, size=(12, 12, 11))
        yy, xx = np.mgrid[0:12, 0:12]
        blob = np.exp(-((yy - 6) ** 2 + (xx - 6) ** 2) / (2 * 0.8**2))
        coarse[:, :, FIRE_CHANNELS[0]] += heat * blob
        coarse[:, :, FIRE_CHANNELS[1]] += 0.6 * heat * blob
        for c in THERMAL_CHANNELS:
            coarse[:, :, c] += 0.3 * heat * blob
        if kind == "glint":
            broad = np.exp(-((yy - 6) ** 2 + (xx - 6) ** 2) / (2 * 3.0**2))
            for c in VISIBLE_CHANNELS:
                coarse[:, :, c] += 2.0 * broad
        values[:, :, :11] = bicubic_upsample(coarse, 3)[3:35, 3:35, :]

        lc = np.full((PATCH_SIZE, PATCH_SIZE), lulc, dtype=np.int64)
        for _ in range(rng.integers(1, 4)):
            r0, c0 = rng.integers(0, PATCH_SIZE - 6, size=2)
            h, w = rng.integers(3, 10, size=2)
            lc[r0:r0 + h, c0:c0 + w] = rng.integers(1, 10)
        lc[14:19, 14:19] = lulc
        values[:, :, 11:32] = _SPECTRA[lc] + rng.normal(0.0, 0.5, size=(PATCH_SIZE, PATCH_SIZE, 21))
        fy, fx = np.mgrid[0:PATCH_SIZE, 0:PATCH_SIZE]
        r2 = (fy - 16) ** 2 + (fx - 16) ** 2
        for c in SMOKE_CHANNELS:
            values[:, :, c] += smoke * np.exp(-r2 / (2 * 3.0**2))
        for c in SCAR_CHANNELS:
            values[:, :, c] -= smoke * np.exp(-r2 / (2 * 2.0**2))
        values[:, :, LULC_CHANNEL] = lc

        if rng.random() < self._cloud_fraction:
            r0, c0 = rng.integers(0, PATCH_SIZE - 8, size=2)
            values[r0:r0 + 8, c0:c0 + 8, 11:32] = np.nan
        return ingest_patch(int(hid), values, self._means)

    def materialize(self) -> list:
        return [self[h] for h in sorted(self._params)]


@dataclass
class SyntheticScene:
    hotspots: list
    burned_areas: list
    patches: SyntheticPatches
    truth: SyntheticTruth

    def __iter__(self):
        return iter((self.hotspots, self.burned_areas, self.patches, self.truth))


def _offset_km(lat, lon, dy_km, dx_km):
    return (
        lat + dy_km / KM_PER_DEG_LAT,
        lon + dx_km / (KM_PER_DEG_LON_EQ * math.cos(math.radians(lat))),
    )


def _polygon_area_ha(ring_lonlat, lat0) -> float:
    x = np.array([p[0] for p in ring_lonlat]) * KM_PER_DEG_LON_EQ * math.cos(math.radians(lat0))
    y = np.array([p[1] for p in ring_lonlat]) * KM_PER_DEG_LAT
    km2 = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    return float(km2 * 100.0)


def _dist_km(lat1, lon1, lat2, lon2):
    dy = (lat1 - lat2) * KM_PER_DEG_LAT
    dx = (lon1 - lon2) * KM_PER_DEG_LON_EQ * np.cos(np.radians((lat1 + lat2) / 2))
    return np.hypot(dx, dy)


def _choose(rng, prior: dict) -> int:
    keys = list(prior)
    p = np.array([prior[k] for k in keys], dtype=np.float64)
    return int(keys[rng.choice(len(keys), p=p / p.sum())])


def _split_counts(rng, total, n_bins, minimum=0):
    if n_bins == 0:
        return []
    base = np.full(n_bins, minimum, dtype=np.int64)
    rest = total - base.sum()
    weights = rng.dirichlet(np.full(n_bins, 2.0))
    return (base + rng.multinomial(rest, weights)).tolist()


def generate_synthetic_scene(cfg: SceneConfig = SceneConfig(), seed: int = 0) -> SyntheticScene:
    lat_min, lat_max, lon_min, lon_max = cfg.region
    if cfg.n_points < 0 or not 0.0 <= cfg.positive_fraction <= 1.0:
        raise InfeasibleSceneError("n_points must be >= 0 and positive_fraction in [0, 1]")
    if not (lat_min < lat_max and lon_min < lon_max):
        raise InfeasibleSceneError(f"empty region {cfg.region}")
    if cfg.industrial_fraction + cfg.glint_fraction > 1.0:
        raise InfeasibleSceneError("industrial_fraction + glint_fraction exceeds 1")
    n_pos = n_positives(cfg)
    n_neg = cfg.n_points - n_pos
    if n_pos > 0 and cfg.n_fires == 0:
        raise InfeasibleSceneError("positives requested but no fire polygons to host them")
    if cfg.max_fire_days < 1 or cfg.n_days < cfg.max_fire_days + 2:
        raise InfeasibleSceneError("n_days must exceed max_fire_days + 1")
    n_ind = int(round(cfg.industrial_fraction * n_neg))
    n_glint = int(round(cfg.glint_fraction * n_neg))
    n_clutter = n_neg - n_ind - n_glint
    if n_ind > 0 and cfg.n_industrial_sites < 1:
        raise InfeasibleSceneError("industrial hotspots requested but n_industrial_sites < 1")

    rng = np.random.default_rng(seed)
    t_start = day_start(dt.date.fromisoformat(cfg.start_date))
    r_lo, r_hi = cfg.fire_radius_km

    # fire polygons: star-shaped rings with evenly spaced angles, pairwise separated
    fires = []
    attempts = 0
    while len(fires) < cfg.n_fires:
        attempts += 1
        if attempts > 1000 * max(cfg.n_fires, 1):
            raise InfeasibleSceneError("could not place non-overlapping fire polygons in the region")
        lat = rng.uniform(lat_min + 0.1, lat_max - 0.1)
        lon = rng.uniform(lon_min + 0.1, lon_max - 0.1)
        radius = rng.uniform(r_lo, r_hi)
        if any(_dist_km(lat, lon, f["lat"], f["lon"]) < radius + f["radius"] * 1.3 + 3.0 for f in fires):
            continue
        k = int(rng.integers(8, 13))
        angles = np.arange(k) * 2 * math.pi / k
        radii = radius * rng.uniform(0.85, 1.15, size=k)
        ring = []
        for a, r in zip(angles, radii):
            la, lo = _offset_km(lat, lon, r * math.sin(a), r * math.cos(a))
            ring.append((lo, la))
        inner = float(radii.min() * math.cos(math.pi / k) * 0.9)
        fires.append({"lat": lat, "lon": lon, "radius": float(radii.max()), "inner": inner, "ring": ring})

    # positives per fire and per active day
    rows = []  # (kind, lat, lon, t)
    fire_meta = []
    pos_counts = _split_counts(rng, n_pos, cfg.n_fires, minimum=1 if n_pos >= cfg.n_fires else 0)
    if n_pos < cfg.n_fires:
        pos_counts = [1] * n_pos + [0] * (cfg.n_fires - n_pos)
    for i, (f, k) in enumerate(zip(fires, pos_counts)):
        n_days = int(rng.integers(1, max(1, min(cfg.max_fire_days, (k + 1) // 2)) + 1)) if k else 1
        d0 = int(rng.integers(0, cfg.n_days - n_days - 1))
        # every day but the last needs two detections, else the fire looks extinct early
        per_day = np.array([2] * (n_days - 1) + [1]) if k else np.zeros(n_days, dtype=np.int64)
        if k:
            per_day += rng.multinomial(k - per_day.sum(), np.full(n_days, 1.0 / n_days))
        for d, cnt in enumerate(per_day):
            for _ in range(int(cnt)):
                rr = f["inner"] * math.sqrt(rng.random())
                th = rng.uniform(0, 2 * math.pi)
                la, lo = _offset_km(f["lat"], f["lon"], rr * math.sin(th), rr * math.cos(th))
                rows.append(["fire", la, lo, t_start + (d0 + d) * 86400])
        start_date = dt.date.fromisoformat(cfg.start_date) + dt.timedelta(days=d0)
        end_date = start_date + dt.timedelta(days=n_days - 1 + int(rng.integers(0, 6)))
        area_id = f"BA{seed}-{i:04d}"
        poly = PolygonGeom.from_lonlat(f["ring"])
        fire_meta.append((area_id, start_date, n_days))
        f["record"] = BurnedAreaRecord(
            id=area_id,
            geometry=(poly,),
            reported=TimeInterval(day_start(start_date), day_end(end_date)),
            area_ha=_polygon_area_ha(f["ring"], f["lat"]),
        )

    def outside_fires(lat, lon, margin_km=3.0):
        return all(_dist_km(lat, lon, f["lat"], f["lon"]) > f["radius"] + margin_km for f in fires)

    def random_location():
        for _ in range(10000):
            lat = rng.uniform(lat_min, lat_max)
            lon = rng.uniform(lon_min, lon_max)
            if outside_fires(lat, lon):
                return lat, lon
        raise InfeasibleSceneError("region too crowded by fire polygons to place negatives")

    n_sites = cfg.n_industrial_sites if n_ind else 0
    sites = [random_location() for _ in range(n_sites)]
    for site, cnt in zip(sites, _split_counts(rng, n_ind, n_sites)):
        for _ in range(cnt):
            la, lo = _offset_km(site[0], site[1], rng.normal(0, 0.1), rng.normal(0, 0.1))
            rows.append(["industrial", la, lo, t_start + int(rng.integers(0, cfg.n_days)) * 86400])
    for kind, cnt in (("glint", n_glint), ("clutter", n_clutter)):
        for _ in range(cnt):
            la, lo = random_location()
            rows.append([kind, la, lo, t_start + int(rng.integers(0, cfg.n_days)) * 86400])

    # sensor, time of day and measured values
    sensors = [Sensor.MODIS, Sensor.VIIRS750, Sensor.VIIRS375]
    drafts = []
    for kind, la, lo, day_t in rows:
        sensor = sensors[int(rng.choice(3, p=[0.4, 0.3, 0.3]))]
        day_hours, night_hours = _OVERPASS[sensor]
        p_day = {"fire": 0.8, "industrial": 0.5, "glint": 1.0, "clutter": 0.5}[kind]
        hours = day_hours if rng.random() < p_day else night_hours
        hour = hours[int(rng.integers(0, len(hours)))]
        sec = int(np.clip(hour * 3600 + rng.normal(0, 2400), 0, 86399))
        t = day_t + sec
        if kind == "industrial" and dt.datetime.fromtimestamp(t, tz=dt.timezone.utc).weekday() == 6 and rng.random() < 0.6:
            t -= 86400 * int(rng.integers(1, 3))
            t = max(t, t_start)
        drafts.append((kind, la, lo, t, sensor))
    order = sorted(range(len(drafts)), key=lambda i: (drafts[i][3], drafts[i][1], drafts[i][2]))

    hotspots, labels, kinds, params = [], {}, {}, {}
    noise = cfg.sensor_noise
    for new_id, i in enumerate(order, start=1):
        kind, la, lo, t, sensor = drafts[i]
        mwir, lwir, log_frp = _SENSOR_PROFILE[kind]
        mwir_v = mwir + rng.normal(0, 12.0 * noise)
        lwir_v = lwir + rng.normal(0, 6.0 * noise)
        frp = float(np.exp(log_frp + rng.normal(0, 0.8 * noise)))
        if sensor is Sensor.VIIRS375:
            frp *= 0.3
            mwir_v = min(mwir_v, 367.0)  # I4 saturation
        band_mwir, band_lwir = {
            Sensor.MODIS: ("t_21", "t_31"),
            Sensor.VIIRS750: ("t_m13", "t_m15"),
            Sensor.VIIRS375: ("t_i4", "t_i5"),
        }[sensor]
        bands = {}
        if rng.random() >= cfg.missing_fraction:
            bands[band_mwir] = round(float(mwir_v), 2)
        if rng.random() >= cfg.missing_fraction:
            bands[band_lwir] = round(float(lwir_v), 2)
        frp_v = round(frp, 3) if rng.random() >= cfg.missing_fraction else None
        conf_mean = {"fire": 80.0, "industrial": 75.0, "glint": 55.0, "clutter": 50.0}[kind]
        conf = float(np.clip(round(conf_mean + rng.normal(0, 15)), 0, 100))
        hotspots.append(HotspotRecord(
            id=new_id, point=GeoPoint(la, lo), time=int(t), sensor=sensor,
            frp=frp_v, bands=bands, confidence=conf,
        ))
        labels[new_id] = int(kind == "fire")
        kinds[new_id] = kind
        lulc = _choose(rng, _LULC_PRIOR[kind])
        heat = {
            "fire": cfg.s3_signal * rng.uniform(0.6, 1.4),
            "industrial": cfg.s3_signal * rng.uniform(0.6, 1.4),
            "glint": rng.uniform(0.0, 0.6),
            "clutter": rng.uniform(0.0, 1.0),
        }[kind]
        smoke = cfg.smoke_signal * rng.uniform(0.5, 1.5) if kind == "fire" else 0.0
        params[new_id] = (kind, lulc, float(heat), float(smoke))

    truth = SyntheticTruth(labels=labels, kinds=kinds, fires=fire_meta, seed=seed, config=cfg.to_dict())
    return SyntheticScene(
        hotspots=hotspots,
        burned_areas=[f["record"] for f in fires],
        patches=SyntheticPatches(seed, params, cfg.cloud_fraction),
        truth=truth,
    )
