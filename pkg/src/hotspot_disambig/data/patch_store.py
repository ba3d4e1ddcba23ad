"""Binary patch store.

Little-endian layout::

    magic  b"HSPT"
    u16    version (1)
    u32    patch count
    per patch: u64 id, u16 H, u16 W, u16 C, then H*W*C float32 as [c][row][col]
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .records import PATCH_CHANNELS, PATCH_SIZE, RasterPatch

MAGIC = b"HSPT"
VERSION = 1
_HEADER = struct.Struct("<4sHI")
_PATCH_HEADER = struct.Struct("<QHHH")


class PatchStoreError(ValueError):
    pass


def write_patches(path, patches: Iterable[RasterPatch], count: int = None) -> int:
    """Write patches; ``count`` lets a generator be streamed without materialising it."""
    if count is None:
        patches = list(patches)
        count = len(patches)
    written = 0
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, count))
        for p in patches:
            h, w, c = p.values.shape
            fh.write(_PATCH_HEADER.pack(p.hotspot_id, h, w, c))
            fh.write(np.ascontiguousarray(p.values.transpose(2, 0, 1), dtype="<f4").tobytes())
            written += 1
    if written != count:
        raise PatchStoreError(f"declared {count} patches but wrote {written}")
    return written


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise PatchStoreError(f"truncated patch store while reading {what}")
    return buf


def iter_patches(path) -> Iterator[RasterPatch]:
    with Path(path).open("rb") as fh:
        magic, version, count = _HEADER.unpack(_read_exact(fh, _HEADER.size, "header"))
        if magic != MAGIC:
            raise PatchStoreError(f"bad magic {magic!r}")
        if version != VERSION:
            raise PatchStoreError(f"unsupported patch store version {version}")
        for i in range(count):
            pid, h, w, c = _PATCH_HEADER.unpack(_read_exact(fh, _PATCH_HEADER.size, f"patch {i} header"))
            if (h, w, c) != (PATCH_SIZE, PATCH_SIZE, PATCH_CHANNELS):
                raise PatchStoreError(f"patch {i}: shape {(h, w, c)} != {(PATCH_SIZE, PATCH_SIZE, PATCH_CHANNELS)}")
            raw = _read_exact(fh, 4 * h * w * c, f"patch {i} values")
            values = np.frombuffer(raw, dtype="<f4").reshape(c, h, w).transpose(1, 2, 0)
            yield RasterPatch(pid, values.astype(np.float32))
        if fh.read(1):
            raise PatchStoreError("trailing bytes after the declared patch count")


def read_patches(path) -> list:
    return list(iter_patches(path))
