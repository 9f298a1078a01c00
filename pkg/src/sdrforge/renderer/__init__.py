"""Deterministic software rasteriser.

Produces the RGB image, the per-pixel instance-id buffer and the depth
buffer for one :class:`~sdrforge.randomizer.SceneFrame`.  The triangle fill
runs in a compiled Cython kernel when it is importable and falls back to
numpy otherwise (set ``SDRFORGE_PURE_PYTHON=1`` to force the fallback).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..camera import CameraSpec, pixel_rays, project  # noqa: F401
from ..scene import HdriEnvironment, direction_to_texel
from . import _raster_py

try:
    if os.environ.get("SDRFORGE_PURE_PYTHON"):
        raise ImportError("pure-python backend forced")
    from . import _raster as _raster_c
except ImportError:
    _raster_c = None

BACKEND = "cython" if _raster_c is not None else "numpy"
NEAR_PLANE = 0.01
LIGHT_GAIN = 0.8

__all__ = [
    "BACKEND",
    "BackgroundImage",
    "RenderOutput",
    "fill_triangles",
    "project",
    "rasterize",
    "read_id_png",
    "sample_environment",
    "shade",
    "write_render",
]


def fill_triangles(sx, sy, iz, width, height, backend=None):
    backend = backend or BACKEND
    sx = np.ascontiguousarray(sx, dtype=np.float64).reshape(-1, 3)
    sy = np.ascontiguousarray(sy, dtype=np.float64).reshape(-1, 3)
    iz = np.ascontiguousarray(iz, dtype=np.float64).reshape(-1, 3)
    if backend == "cython":
        if _raster_c is None:
            raise RuntimeError("compiled raster kernel is not available")
        return _raster_c.fill_triangles(sx, sy, iz, int(width), int(height))
    return _raster_py.fill_triangles(sx, sy, iz, int(width), int(height))


@dataclass(frozen=True, eq=False)
class BackgroundImage:
    """Screen-space background (the random-background style) with flat lighting stats."""

    pixels: np.ndarray  # (H, W, 3) uint8

    @property
    def ambient(self) -> float:
        lum = self.pixels.astype(np.float64) @ np.array([0.2126, 0.7152, 0.0722]) / 255.0
        return float(lum.mean())

    @property
    def light_direction(self) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class RenderOutput:
    rgb: np.ndarray  # (H, W, 3) uint8
    instance_ids: np.ndarray  # (H, W) int32
    depth: np.ndarray  # (H, W) float64, inf on background


def sample_environment(direction, env: HdriEnvironment) -> np.ndarray:
    """Bilinear equirectangular lookup; longitude wraps, latitude clamps at the poles."""
    col, row = direction_to_texel(direction, env.width, env.height, env.yaw_rotation)
    px = env.pixels
    h, w = env.height, env.width
    c0 = np.floor(col)
    fc = (col - c0)[..., None]
    c0 = c0.astype(np.int64) % w
    c1 = (c0 + 1) % w
    row = np.clip(row, 0.0, h - 1)
    r0 = np.floor(row)
    fr = (row - r0)[..., None]
    r0 = r0.astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    top = px[r0, c0] * (1 - fc) + px[r0, c1] * fc
    bottom = px[r1, c0] * (1 - fc) + px[r1, c1] * fc
    return top * (1 - fr) + bottom * fr


def shade(normal, base_color, env, gain: float = LIGHT_GAIN, ambient=None, light=None) -> np.ndarray:
    """Lambertian term from the brightest environment direction plus mean-luminance ambient."""
    n = np.asarray(normal, dtype=np.float64)
    ambient = env.ambient if ambient is None else ambient
    light = env.light_direction if light is None else np.asarray(light, dtype=np.float64)
    lam = np.maximum(0.0, n @ light)
    out = np.asarray(base_color, dtype=np.float64) * (ambient + gain * lam)[..., None]
    return np.clip(out, 0.0, 1.0)


def _clip_near(tri: np.ndarray, near: float):
    """Clip one camera-space triangle against ``depth >= near``; returns 0-2 triangles."""
    depth = -tri[:, 2]
    poly = []
    for i in range(3):
        a, b = tri[i], tri[(i + 1) % 3]
        da, db = depth[i], depth[(i + 1) % 3]
        if da >= near:
            poly.append(a)
        if (da >= near) != (db >= near):
            s = (near - da) / (db - da)
            poly.append(a + s * (b - a))
    return [np.array([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]


def _collect(frame, camera: CameraSpec):
    """Camera-space triangles, owners and face normals, ordered by instance id."""
    tris, owners, normals, colors = [], [], [], []
    eye = np.asarray(camera.position)
    for ent in sorted(frame.entities, key=lambda e: e.instance_id):
        world = ent.pose.apply(ent.mesh.vertices)
        wt = world[ent.mesh.triangles]
        n = np.cross(wt[:, 1] - wt[:, 0], wt[:, 2] - wt[:, 0])
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        # two-sided: face the normal toward the viewer
        flip = np.einsum("ij,ij->i", n, eye - wt[:, 0]) < 0
        n[flip] *= -1
        ct = camera.to_camera(world)[ent.mesh.triangles]
        depth = -ct[:, :, 2]
        keep = (depth >= NEAR_PLANE).all(axis=1)
        straddle = ~keep & (depth >= NEAR_PLANE).any(axis=1)
        for k in np.flatnonzero(keep | straddle):
            pieces = [ct[k]] if keep[k] else _clip_near(ct[k], NEAR_PLANE)
            for p in pieces:
                tris.append(p)
                owners.append(ent.instance_id)
                normals.append(n[k])
                colors.append(ent.mesh.base_color)
    if not tris:
        z = np.zeros((0, 3, 3))
        return z, np.zeros(0, np.int32), np.zeros((0, 3)), np.zeros((0, 3))
    return np.array(tris), np.array(owners, np.int32), np.array(normals), np.array(colors)


def _background(frame, camera: CameraSpec, rows, cols) -> np.ndarray:
    env = frame.environment
    if isinstance(env, BackgroundImage):
        return env.pixels[rows, cols].astype(np.float64) / 255.0
    return sample_environment(pixel_rays(camera, rows, cols), env)


def rasterize(frame, backend=None, ids_only: bool = False) -> RenderOutput:
    cam = frame.camera
    w, h = cam.image_width, cam.image_height
    tris, owners, normals, colors = _collect(frame, cam)
    depth_c = -tris[:, :, 2]
    fpx = cam.focal_length * (w / cam.sensor_width)
    sx = w / 2 + fpx * (tris[:, :, 0] / depth_c)
    sy = h / 2 - fpx * (tris[:, :, 1] / depth_c)
    depth, index = fill_triangles(sx, sy, 1.0 / depth_c, w, h, backend)
    hit = index >= 0
    ids = np.zeros((h, w), dtype=np.int32)
    ids[hit] = owners[index[hit]]
    if ids_only:
        return RenderOutput(np.zeros((h, w, 3), np.uint8), ids, depth)
    rgb = np.empty((h, w, 3), dtype=np.float64)
    if len(tris):
        env = frame.environment
        face_rgb = shade(normals, colors, env)
        rgb[hit] = face_rgb[index[hit]]
    rows, cols = np.nonzero(~hit)
    if len(rows):
        rgb[rows, cols] = _background(frame, cam, rows, cols)
    rgb8 = np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)
    return RenderOutput(rgb8, ids, depth)


# -- files ---------------------------------------------------------------------


def write_render(out: RenderOutput, rgb_path, ids_path, categories: dict) -> None:
    """RGB as PNG, ids as 16-bit grayscale PNG plus a ``.json`` id->category sidecar."""
    Image.fromarray(out.rgb, "RGB").save(rgb_path, format="PNG", optimize=False)
    write_id_png(out.instance_ids, ids_path, categories)


def write_id_png(ids: np.ndarray, path, categories: dict) -> None:
    if ids.max(initial=0) > 65535:
        raise ValueError("instance ids above 65535 do not fit a 16-bit PNG")
    Image.fromarray(ids.astype(np.uint16)).save(path, format="PNG")
    with open(os.path.splitext(os.fspath(path))[0] + ".json", "w", encoding="utf-8") as fh:
        json.dump({str(k): categories[k] for k in sorted(categories)}, fh, indent=1)
        fh.write("\n")


def read_id_png(path):
    with Image.open(path) as im:
        ids = np.asarray(im, dtype=np.int32)
    with open(os.path.splitext(os.fspath(path))[0] + ".json", encoding="utf-8") as fh:
        categories = {int(k): v for k, v in json.load(fh).items()}
    return ids, categories
