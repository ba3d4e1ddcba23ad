from __future__ import annotations

from functools import lru_cache

import numpy as np

KEYS_A = -0.5


def keys_kernel(x, a: float = KEYS_A):
    """Keys cubic convolution kernel."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(x)
    near = x <= 1.0
    far = (x > 1.0) & (x < 2.0)
    out[near] = (a + 2.0) * x[near] ** 3 - (a + 3.0) * x[near] ** 2 + 1.0
    out[far] = a * x[far] ** 3 - 5.0 * a * x[far] ** 2 + 8.0 * a * x[far] - 4.0 * a
    return out


@lru_cache(maxsize=64)
def upsample_weights(n: int, factor: int) -> np.ndarray:
    """(n*factor, n) matrix mapping samples to the upsampled axis.

    Output sample u sits at input coordinate (u + 0.5) / factor - 0.5, so input
    pixel i lands at the centre of output block [i*factor, (i+1)*factor).
    Taps falling off the grid are clamped to the edge sample.
    """
    u = np.arange(n * factor)
    x = (u + 0.5) / factor - 0.5
    base = np.floor(x).astype(int)
    w = np.zeros((n * factor, n))
    for k in range(-1, 3):
        idx = base + k
        np.add.at(w, (u, np.clip(idx, 0, n - 1)), keys_kernel(x - idx))
    w.flags.writeable = False  # shared through the cache
    return w


def bicubic_upsample(grid, factor: int) -> np.ndarray:
    """Upsample a (H, W) or (H, W, C) grid by an integer factor."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim not in (2, 3):
        raise ValueError(f"expected a 2-D or 3-D grid, got shape {grid.shape}")
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    h, w = grid.shape[:2]
    if h < 4 or w < 4:
        raise ValueError(f"grid {h}x{w} too small for bicubic resampling (need >= 4x4)")
    wy = upsample_weights(h, int(factor))
    wx = upsample_weights(w, int(factor))
    if grid.ndim == 2:
        return wy @ grid @ wx.T
    rows = np.tensordot(wy, grid, axes=(1, 0))
    return np.tensordot(rows, wx, axes=(1, 1)).transpose(0, 2, 1)


def extract_patch(raster, row: int, col: int, size: int = 32) -> np.ndarray:
    """Crop a size x size window whose centre pixel (size//2, size//2) is (row, col).

    Pixels outside the raster repeat the nearest edge pixel.
    """
    raster = np.asarray(raster)
    h, w = raster.shape[:2]
    rows = np.clip(np.arange(row - size // 2, row - size // 2 + size), 0, h - 1)
    cols = np.clip(np.arange(col - size // 2, col - size // 2 + size), 0, w - 1)
    return raster[np.ix_(rows, cols)]
