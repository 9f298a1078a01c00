"""Pinhole camera with a look-at orientation (world +Z up, camera looks down -Z)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import Vec3

SENSOR_WIDTH_MM = 36.0
BEHIND_EPS = 1e-6


@dataclass(frozen=True)
class CameraSpec:
    position: Vec3
    look_at: Vec3
    focal_length: float  # mm
    sensor_width: float = SENSOR_WIDTH_MM
    image_width: int = 640
    image_height: int = 480

    def __post_init__(self):
        object.__setattr__(self, "position", Vec3(*(float(v) for v in self.position)))
        object.__setattr__(self, "look_at", Vec3(*(float(v) for v in self.look_at)))
        if not all(math.isfinite(v) for v in (*self.position, *self.look_at)):
            raise ValueError("camera position and look_at must be finite")
        if not self.focal_length > 0:
            raise ValueError("focal length must be positive")

    @property
    def focal_px(self) -> float:
        return self.focal_length * self.image_width / self.sensor_width

    def basis(self):
        """Rows ``right, up, back`` of the world-to-camera rotation."""
        pos = np.asarray(self.position)
        forward = np.asarray(self.look_at) - pos
        norm = np.linalg.norm(forward)
        if norm == 0:
            raise ValueError("look_at coincides with camera position")
        forward = forward / norm
        right = np.cross(forward, (0.0, 0.0, 1.0))
        if np.linalg.norm(right) < 1e-9:
            right = np.cross(forward, (0.0, 1.0, 0.0))
        right = right / np.linalg.norm(right)
        up = np.cross(right, forward)
        return np.stack([right, up, -forward])

    def to_camera(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64) - np.asarray(self.position)
        return p @ self.basis().T

    def to_dict(self) -> dict:
        return {
            "position": list(self.position),
            "look_at": list(self.look_at),
            "focal_length": self.focal_length,
            "sensor_width": self.sensor_width,
            "image_width": self.image_width,
            "image_height": self.image_height,
        }


def project(point, camera: CameraSpec):
    """Pixel ``(x, y, depth)`` of a world point, or ``None`` when it is behind the camera."""
    xc, yc, zc = camera.to_camera(point)
    if zc >= -BEHIND_EPS:
        return None
    depth = -zc
    x, y = _to_screen(xc, yc, depth, camera)
    return (float(x), float(y), float(depth))


def project_points(points, camera: CameraSpec):
    """Vectorised :func:`project`; rows behind the camera get NaN pixel coordinates."""
    cam = camera.to_camera(points)
    depth = -cam[..., 2]
    ok = cam[..., 2] < -BEHIND_EPS
    safe = np.where(ok, depth, 1.0)
    x, y = _to_screen(cam[..., 0], cam[..., 1], safe, camera)
    x = np.where(ok, x, np.nan)
    y = np.where(ok, y, np.nan)
    return x, y, depth, ok


def _to_screen(xc, yc, depth, camera: CameraSpec):
    w, h = camera.image_width, camera.image_height
    scale = camera.focal_length * (w / camera.sensor_width)
    return w / 2 + scale * (xc / depth), h / 2 - scale * (yc / depth)


def pixel_rays(camera: CameraSpec, rows=None, cols=None) -> np.ndarray:
    """Unit world-space directions through pixel centres (all pixels by default)."""
    w, h = camera.image_width, camera.image_height
    if rows is None:
        rows, cols = np.mgrid[0:h, 0:w]
    fpx = camera.focal_px
    xc = (np.asarray(cols) + 0.5 - w / 2) / fpx
    yc = -(np.asarray(rows) + 0.5 - h / 2) / fpx
    d = np.stack([xc, yc, -np.ones_like(xc, dtype=np.float64)], axis=-1)
    d = d @ camera.basis()
    return d / np.linalg.norm(d, axis=-1, keepdims=True)
