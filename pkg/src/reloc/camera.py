"""Pinhole intrinsics and the projection helpers shared by the depth
renderer, the pixel-match counter and the overlap computation.

Pixel (row, col) covers the unit square [col, col+1) x [row, row+1); its
center is at image coordinates (col + 0.5, row + 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def scaled(self, width: int, height: int | None = None) -> "Intrinsics":
        """Rescale to a new image size, keeping the field of view."""
        if height is None:
            height = width
        sx = width / self.width
        sy = height / self.height
        return Intrinsics(
            fx=self.fx * sx,
            fy=self.fy * sy,
            cx=self.cx * sx,
            cy=self.cy * sy,
            width=width,
            height=height,
        )

    def project(self, points_cam: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Project camera-frame points; returns (u, v, z).

        Points with z <= 0 are behind the camera and yield nonsense (u, v);
        callers must mask on z themselves.
        """
        p = np.asarray(points_cam, dtype=float).reshape(-1, 3)
        z = p[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * p[:, 0] / z + self.cx
            v = self.fy * p[:, 1] / z + self.cy
        return u, v, z

    def backproject_pixels(self, rows: np.ndarray, cols: np.ndarray, depth: np.ndarray) -> np.ndarray:
        """Camera-frame points for pixel centers at the given depths."""
        u = np.asarray(cols, dtype=float) + 0.5
        v = np.asarray(rows, dtype=float) + 0.5
        z = np.asarray(depth, dtype=float)
        x = (u - self.cx) / self.fx * z
        y = (v - self.cy) / self.fy * z
        return np.stack([x, y, z], axis=-1)

    def contains(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Mask of image coordinates that land inside the image."""
        return (u >= 0.0) & (u < self.width) & (v >= 0.0) & (v < self.height)


def default_intrinsics(resolution: int = 64) -> Intrinsics:
    """Square 90-degree-FOV camera used when no calibration is supplied."""
    f = resolution / 2.0
    c = resolution / 2.0
    return Intrinsics(fx=f, fy=f, cx=c, cy=c, width=resolution, height=resolution)
