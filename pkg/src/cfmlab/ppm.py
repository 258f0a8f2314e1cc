"""Binary PPM (P6) scatter plots: no image libraries needed."""
from __future__ import annotations

import numpy as np


def write_scatter_ppm(path, points: np.ndarray, size: int = 512,
                      pad: float = 0.10) -> None:
    """Rasterizes points as 3x3 black squares on white.

    The axis box is the data bounding box padded by `pad` on each side;
    degenerate boxes fall back to unit extent.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != 2:
        raise ValueError(f"scatter plots need 2-D points, got dim {points.shape[1]}")
    img = np.full((size, size), 255, dtype=np.uint8)
    if len(points):
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        lo = lo - pad * span
        hi = hi + pad * span
        span = hi - lo
        cols = ((points[:, 0] - lo[0]) / span[0] * (size - 1)).round().astype(int)
        rows = ((hi[1] - points[:, 1]) / span[1] * (size - 1)).round().astype(int)
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                r = np.clip(rows + dr, 0, size - 1)
                c = np.clip(cols + dc, 0, size - 1)
                img[r, c] = 0
    with open(path, "wb") as fh:
        fh.write(f"P6\n{size} {size}\n255\n".encode("ascii"))
        fh.write(np.repeat(img[:, :, None], 3, axis=2).tobytes())
