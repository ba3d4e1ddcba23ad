"""Burned-area FeatureCollection I/O.

Each feature carries ``properties.{id, start_date, end_date, area_ha}`` with ISO
dates covering 00:00:00 to 23:59:59 UTC, and a Polygon or MultiPolygon geometry
in lon/lat. An optional ``properties.estimated_end`` is read back if present.
"""
from __future__ import annotations

import datetime as dt
import json
import warnings
from pathlib import Path

from ..geo import PolygonGeom, TimeInterval
from .records import MIN_BURNED_AREA_HA, BurnedAreaRecord, day_end, day_start


class BurnedAreaFormatError(ValueError):
    pass


def _polygon(coords, fid) -> PolygonGeom:
    if not isinstance(coords, list) or not coords:
        raise BurnedAreaFormatError(f"feature {fid}: polygon needs at least an exterior ring")
    try:
        rings = [[(float(p[0]), float(p[1])) for p in ring] for ring in coords]
        return PolygonGeom.from_lonlat(rings[0], rings[1:])
    except (TypeError, ValueError, IndexError) as exc:
        raise BurnedAreaFormatError(f"feature {fid}: malformed geometry ({exc})") from None


def _parse_geometry(geom, fid) -> tuple:
    if not isinstance(geom, dict):
        raise BurnedAreaFormatError(f"feature {fid}: missing geometry")
    kind = geom.get("type")
    coords = geom.get("coordinates")
    if kind == "Polygon":
        return (_polygon(coords, fid),)
    if kind == "MultiPolygon":
        if not isinstance(coords, list) or not coords:
            raise BurnedAreaFormatError(f"feature {fid}: empty MultiPolygon")
        return tuple(_polygon(c, fid) for c in coords)
    raise BurnedAreaFormatError(f"feature {fid}: unsupported geometry type {kind!r}")


def _date(text, fid, key) -> dt.date:
    try:
        return dt.date.fromisoformat(str(text)[:10])
    except ValueError:
        raise BurnedAreaFormatError(f"feature {fid}: bad {key} {text!r}") from None


def read_burned_areas(path) -> list:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise BurnedAreaFormatError(f"{path}: not a FeatureCollection")
    out = []
    for i, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        fid = str(props.get("id", i))
        for key in ("start_date", "end_date", "area_ha"):
            if key not in props:
                raise BurnedAreaFormatError(f"feature {fid}: missing properties.{key}")
        start = _date(props["start_date"], fid, "start_date")
        end = _date(props["end_date"], fid, "end_date")
        if end < start:
            raise BurnedAreaFormatError(f"feature {fid}: end_date {end} before start_date {start}")
        area = float(props["area_ha"])
        geometry = _parse_geometry(feat.get("geometry"), fid)
        if not area >= MIN_BURNED_AREA_HA:
            warnings.warn(f"burned area {fid} excluded: area_ha {area} < {MIN_BURNED_AREA_HA}", stacklevel=2)
            continue
        est = props.get("estimated_end")
        out.append(BurnedAreaRecord(
            id=fid,
            geometry=geometry,
            reported=TimeInterval(day_start(start), day_end(end)),
            area_ha=area,
            estimated_end=_date(est, fid, "estimated_end") if est else None,
        ))
    return out


def _geometry_json(parts) -> dict:
    polys = [p.lonlat_rings() for p in parts]
    # close rings on output, as GeoJSON expects
    polys = [[ring + [ring[0]] for ring in poly] for poly in polys]
    if len(polys) == 1:
        return {"type": "Polygon", "coordinates": polys[0]}
    return {"type": "MultiPolygon", "coordinates": polys}


def write_burned_areas(path, areas) -> None:
    feats = []
    for a in areas:
        props = {
            "id": a.id,
            "start_date": a.start_date.isoformat(),
            "end_date": a.end_date.isoformat(),
            "area_ha": a.area_ha,
        }
        if a.estimated_end is not None:
            props["estimated_end"] = a.estimated_end.isoformat()
        feats.append({"type": "Feature", "properties": props, "geometry": _geometry_json(a.geometry)})
    Path(path).write_text(json.dumps({"type": "FeatureCollection", "features": feats}), encoding="utf-8")
