"""Weak-perspective camera: uniform scale plus 2D pixel translation.

A 3D point (x, y, z) maps to pixel (s*x + tx, s*y + ty); depth is carried
separately as the camera-space z value. `depth_sign` selects which z
direction faces the camera: with depth_sign=+1 the camera sits at z=+inf
looking down -z, so larger z is nearer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class WeakPerspectiveCamera:
    scale: float  # pixels per meter, > 0
    translation: tuple  # (tx, ty) pixels
    image_size: tuple  # (width, height) pixels
    depth_sign: int = 1

    def __post_init__(self):
        if self.scale <= 0:
            raise ParameterError(f"scale must be positive, got {self.scale}")
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise ParameterError(f"image_size must be positive, got {self.image_size}")
        if self.depth_sign not in (1, -1):
            raise ParameterError(f"depth_sign must be +1 or -1, got {self.depth_sign}")

    def project(self, points):
        """Project (..., 3) points to continuous (..., 2) pixel coordinates."""
        p = np.asarray(points, dtype=np.float64)
        return self.scale * p[..., :2] + np.asarray(self.translation, dtype=np.float64)

    def depth(self, points):
        """Camera-space depth of (..., 3) points (raw z values)."""
        return np.asarray(points, dtype=np.float64)[..., 2]

    def nearer(self, z_a, z_b):
        """True where depth z_a is nearer to the camera than z_b."""
        return self.depth_sign * (np.asarray(z_a) - np.asarray(z_b)) > 0


def project(camera, point):
    """Functional form of WeakPerspectiveCamera.project."""
    return camera.project(point)


def fit_camera_to_bbox(points, image_size, margin=0.1, depth_sign=1):
    """Fit scale/translation so the xy bounding box of `points` fills the
    frame with a relative margin, preserving aspect ratio."""
    p = np.asarray(points, dtype=np.float64)
    lo = p[:, :2].min(axis=0)
    hi = p[:, :2].max(axis=0)
    extent = np.maximum(hi - lo, 1e-12)
    w, h = image_size
    avail = np.array([w, h], dtype=np.float64) * (1.0 - 2.0 * margin)
    s = float(np.min(avail / extent))
    center_px = np.array([w, h], dtype=np.float64) / 2.0
    center_world = 0.5 * (lo + hi)
    t = center_px - s * center_world
    return WeakPerspectiveCamera(s, (float(t[0]), float(t[1])), (int(w), int(h)), depth_sign)
