"""Hotspot CSV reading and writing.

Header: ``id,latitude,longitude,acq_datetime,sensor,confidence,frp,t_21,...,t_i5``
with an optional trailing ``label`` column (0/1) on labeled files.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
import warnings
from pathlib import Path

from ..geo import GeoPoint
from .records import BAND_NAMES, HotspotRecord, RecordValidationError

log = logging.getLogger(__name__)

MANDATORY_COLUMNS = ("id", "latitude", "longitude", "acq_datetime", "sensor")
COLUMNS = MANDATORY_COLUMNS + ("confidence", "frp") + BAND_NAMES

_ISO_FMT = "%Y-%m-%dT%H:%M:%SZ"


class HotspotCSVError(ValueError):
    """File-level problem: missing column or rejected rows."""

    def __init__(self, message, row_errors=()):
        super().__init__(message)
        self.row_errors = list(row_errors)


def parse_time(text: str) -> int:
    d = dt.datetime.strptime(text.strip(), _ISO_FMT).replace(tzinfo=dt.timezone.utc)
    return int(d.timestamp())


def format_time(t: int) -> str:
    return dt.datetime.fromtimestamp(int(t), tz=dt.timezone.utc).strftime(_ISO_FMT)


def _opt_float(text):
    text = (text or "").strip()
    return None if text == "" else float(text)


def _parse_row(row: dict) -> HotspotRecord:
    try:
        point = GeoPoint(float(row["latitude"]), float(row["longitude"]))
    except (TypeError, ValueError) as exc:
        raise RecordValidationError(f"invalid coordinates: {exc}") from None
    bands = {}
    for name in BAND_NAMES:
        v = _opt_float(row.get(name))
        if v is not None:
            bands[name] = v
    label_text = (row.get("label") or "").strip()
    return HotspotRecord(
        id=int(row["id"]),
        point=point,
        time=parse_time(row["acq_datetime"]),
        sensor=row["sensor"].strip(),
        frp=_opt_float(row.get("frp")),
        bands=bands,
        confidence=_opt_float(row.get("confidence")),
        label=int(label_text) if label_text else None,
    )


def read_hotspot_csv(path, errors: str = "raise") -> list:
    """Read hotspot records.

    Invalid rows are collected with their 1-based file line numbers (header is
    line 1). With ``errors="raise"`` any invalid row raises
    :class:`HotspotCSVError`; with ``errors="skip"`` they are dropped and
    reported through :mod:`warnings`.
    """
    if errors not in ("raise", "skip"):
        raise ValueError("errors must be 'raise' or 'skip'")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MANDATORY_COLUMNS if c not in header]
        if missing:
            raise HotspotCSVError(f"{path}: missing mandatory column(s) {missing}")
        records, row_errors = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append(_parse_row(row))
            except (RecordValidationError, ValueError, KeyError) as exc:
                row_errors.append((lineno, str(exc)))
    if row_errors:
        summary = "; ".join(f"line {n}: {msg}" for n, msg in row_errors[:20])
        if errors == "raise":
            raise HotspotCSVError(f"{path}: {len(row_errors)} invalid row(s): {summary}", row_errors)
        warnings.warn(f"{path}: skipped {len(row_errors)} invalid row(s): {summary}", stacklevel=2)
    return records


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_hotspot_csv(path, records, with_label: bool = False) -> None:
    cols = COLUMNS + (("label",) if with_label else ())
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            row = [
                str(r.id), repr(r.point.lat), repr(r.point.lon), format_time(r.time), r.sensor.value,
                _fmt(r.confidence), _fmt(r.frp),
            ] + [_fmt(r.bands.get(b)) for b in BAND_NAMES]
            if with_label:
                row.append("" if r.label is None else str(int(r.label)))
            w.writerow(row)
