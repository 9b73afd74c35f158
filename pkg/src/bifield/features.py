"""Fixed pixel-aligned feature backend.

Learned image encoders are out of scope; multi-view features come from an
image pyramid of box-filtered intensities. The interface (a per-view grid
of C-channel feature vectors, bilinearly sampled at projected pixels)
isolates the backend so a learned encoder could be slotted in later.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter


@dataclass
class FeatureGrid:
    """Per-view feature arrays of shape (n_views, h, w, channels)."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 4:
            raise ValueError("FeatureGrid data must be (n_views, h, w, c)")

    @property
    def n_views(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]


def build_feature_grid(images: list[np.ndarray], n_levels: int = 4) -> FeatureGrid:
    """Multi-scale box-filtered intensity pyramid, one channel per level.

    Level k applies a (2*3^k + 1)-wide uniform filter, so channels move from
    raw intensity toward coarse context. Filtering stays at full resolution;
    all views share (h, w, c).
    """
    views = []
    for img in images:
        img = np.asarray(img, dtype=np.float32)
        if img.ndim != 2:
            raise ValueError("feature backend expects single-channel images")
        chans = [img]
        for k in range(1, n_levels):
            size = 2 * 3**k + 1
            chans.append(uniform_filter(img, size=size, mode="nearest"))
        views.append(np.stack(chans, axis=-1))
    data = np.stack(views, axis=0)
    return FeatureGrid(data=data)


def sample_feature(grid: FeatureGrid, cam_index: int, pixel) -> np.ndarray:
    """Bilinear feature lookup at one pixel (clamped to the image bounds)."""
    return sample_features(grid, cam_index, np.asarray(pixel, dtype=np.float64).reshape(1, 2))[0]


def sample_features(grid: FeatureGrid, cam_index: int, pixels: np.ndarray) -> np.ndarray:
    """Vectorized bilinear interpolation of the four neighboring feature vectors.

    Pixels outside the image are clamped to the border (clamp semantics).
    Returns float64 (n, channels).
    """
    h, w = grid.shape
    view = grid.data[cam_index]
    u = np.clip(pixels[:, 0], 0.0, w - 1.0)
    v = np.clip(pixels[:, 1], 0.0, h - 1.0)
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (u - x0)[:, None]
    fy = (v - y0)[:, None]
    f00 = view[y0, x0].astype(np.float64)
    f10 = view[y0, x1].astype(np.float64)
    f01 = view[y1, x0].astype(np.float64)
    f11 = view[y1, x1].astype(np.float64)
    return (
        f00 * (1 - fx) * (1 - fy)
        + f10 * fx * (1 - fy)
        + f01 * (1 - fx) * fy
        + f11 * fx * fy
    )
