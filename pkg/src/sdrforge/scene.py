"""Geometry and asset layer: poses, meshes, entities and environment maps."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from PIL import Image

from .errors import AspectError, EmptyMesh, InvalidSize, ParseError

CATEGORIES = ("drone", "bird", "distractor")
PRIMITIVE_KINDS = ("cube", "cone", "sphere", "cylinder")
PROP_KINDS = ("car", "lamppost", "traffic_cone", "traffic_sign")
DRONE_MODELS = ("phantom", "inspire", "mavic_a", "mavic_b", "fpv")

SEGMENTS = 16
SPHERE_RINGS = 8
DRONE_DIAGONAL = 0.35


class Vec3(NamedTuple):
    x: float
    y: float
    z: float


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_yaw(yaw: float) -> tuple:
    return (math.cos(yaw / 2), 0.0, 0.0, math.sin(yaw / 2))


def quat_from_axis_angle(axis, angle: float) -> tuple:
    ax = np.asarray(axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    s = math.sin(angle / 2)
    return (math.cos(angle / 2), ax[0] * s, ax[1] * s, ax[2] * s)


@dataclass(frozen=True)
class Pose:
    """Translation, unit-quaternion rotation ``(w, x, y, z)`` and uniform scale."""

    translation: Vec3 = Vec3(0.0, 0.0, 0.0)
    rotation: tuple = (1.0, 0.0, 0.0, 0.0)
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "translation", Vec3(*(float(v) for v in self.translation)))
        object.__setattr__(self, "rotation", tuple(float(v) for v in self.rotation))
        if len(self.rotation) != 4 or abs(math.sqrt(sum(v * v for v in self.rotation)) - 1.0) > 1e-6:
            raise ValueError(f"rotation must be a unit quaternion, got {self.rotation}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64) * self.scale
        return pts @ self.matrix().T + np.asarray(self.translation)


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    base_color: tuple = (0.5, 0.5, 0.5)
    kind: str = "mesh"

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "base_color", tuple(float(c) for c in self.base_color))
        if len(v) < 3:
            raise EmptyMesh(f"mesh needs at least 3 vertices, got {len(v)}")
        if len(t) == 0:
            raise EmptyMesh("mesh has no triangles")
        if t.min() < 0 or t.max() >= len(v):
            raise ValueError("triangle index out of range")
        bad = np.flatnonzero(triangle_areas(v, t) <= 1e-12)
        if len(bad):
            raise ValueError(f"degenerate triangle(s) at index {bad.tolist()[:5]}")
        if any(not 0.0 <= c <= 1.0 for c in self.base_color):
            raise ValueError(f"base_color must lie in [0,1], got {self.base_color}")

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and self.base_color == other.base_color
            and self.kind == other.kind
        )

    __hash__ = object.__hash__

    def with_color(self, color) -> "Mesh":
        return Mesh(self.vertices, self.triangles, color, self.kind)

    @cached_property
    def surface_centroid(self) -> np.ndarray:
        tri = self.vertices[self.triangles]
        areas = triangle_areas(self.vertices, self.triangles)
        return (tri.mean(axis=1) * areas[:, None]).sum(axis=0) / areas.sum()

    @property
    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a, b, c = (vertices[triangles[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


@dataclass(frozen=True)
class Trajectory:
    """Per-frame poses for one segment, stored column-wise."""

    positions: np.ndarray  # (L, 3)
    rotations: np.ndarray  # (L, 4)
    scales: np.ndarray  # (L,)

    def __len__(self):
        return len(self.positions)

    def pose(self, i: int) -> Pose:
        return Pose(Vec3(*self.positions[i]), tuple(self.rotations[i]), float(self.scales[i]))

    def __getitem__(self, i: int) -> Pose:
        return self.pose(i)


@dataclass(frozen=True)
class SceneEntity:
    mesh: Mesh
    category: str
    trajectory: Trajectory
    instance_id: int

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.instance_id < 1:
            raise ValueError("instance_id 0 is reserved for background")


@dataclass(frozen=True, eq=False)
class HdriEnvironment:
    """Equirectangular RGB map (float, >= 0) with a yaw rotation about +Z."""

    pixels: np.ndarray
    yaw_rotation: float = 0.0
    name: str = ""

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError("environment pixels must be an (H, W, 3) grid")
        h, w = px.shape[:2]
        if w != 2 * h:
            raise AspectError(f"equirectangular map must be 2:1, got {w}x{h}")
        if (px < 0).any():
            raise ValueError("environment values must be non-negative")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def rotated(self, yaw: float) -> "HdriEnvironment":
        return HdriEnvironment(self.pixels, float(yaw), self.name)

    @cached_property
    def luminance(self) -> np.ndarray:
        return self.pixels @ np.array([0.2126, 0.7152, 0.0722], dtype=np.float32)

    @cached_property
    def ambient(self) -> float:
        return float(self.luminance.mean())

    @cached_property
    def _brightest_texel(self):
        return divmod(int(np.argmax(self.luminance)), self.width)

    @property
    def light_direction(self) -> np.ndarray:
        row, col = self._brightest_texel
        return texel_to_direction(row, col, self.width, self.height, self.yaw_rotation)


def direction_to_texel(direction, width: int, height: int, yaw: float = 0.0):
    """Continuous ``(col, row)`` coordinates; texel centres sit on integers."""
    d = np.asarray(direction, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    phi = np.arctan2(y, x) - yaw
    u = np.mod(phi / (2 * np.pi), 1.0)
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    col = u * width - 0.5
    row = theta / np.pi * height - 0.5
    return col, row


def texel_to_direction(row, col, width: int, height: int, yaw: float = 0.0) -> np.ndarray:
    phi = (np.asarray(col, dtype=np.float64) + 0.5) / width * 2 * np.pi + yaw
    theta = (np.asarray(row, dtype=np.float64) + 0.5) / height * np.pi
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


# -- file formats --------------------------------------------------------------

_IGNORED_OBJ = {"vn", "vt", "vp", "o", "g", "s", "usemtl", "mtllib", "l", "p"}


def load_mesh(path, color=(0.5, 0.5, 0.5), kind: str | None = None) -> Mesh:
    """Read the ``v``/``f`` subset of Wavefront OBJ; polygons are fan-triangulated."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    verts: list = []
    faces: list = []
    face_lines: list = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tag, *rest = line.split()
            if tag == "v":
                if len(rest) not in (3, 4):
                    raise ParseError("vertex needs 3 coordinates", path, lineno)
                try:
                    coords = [float(c) for c in rest[:3]]
                except ValueError:
                    raise ParseError("non-numeric vertex coordinate", path, lineno) from None
                if not all(math.isfinite(c) for c in coords):
                    raise ParseError("non-finite vertex coordinate", path, lineno)
                verts.append(coords)
            elif tag == "f":
                if len(rest) < 3:
                    raise ParseError("face needs at least 3 vertices", path, lineno)
                idx = []
                for token in rest:
                    try:
                        i = int(token.split("/", 1)[0])
                    except ValueError:
                        raise ParseError(f"bad face index {token!r}", path, lineno) from None
                    if i < 0:
                        i = len(verts) + 1 + i
                    if not 1 <= i <= len(verts):
                        raise ParseError(f"face index {token} out of range", path, lineno)
                    idx.append(i - 1)
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
                    face_lines.append(lineno)
            elif tag not in _IGNORED_OBJ:
                raise ParseError(f"unsupported record {tag!r}", path, lineno)
    if not faces:
        raise EmptyMesh(f"{path}: no faces")
    v = np.array(verts, dtype=np.float64)
    t = np.array(faces, dtype=np.int64)
    bad = np.flatnonzero(triangle_areas(v, t) <= 1e-12)
    if len(bad):
        raise ParseError("degenerate triangle", path, face_lines[bad[0]])
    if kind is None:
        kind = os.path.splitext(os.path.basename(path))[0]
    return Mesh(v, t, color, kind)


def save_mesh(mesh: Mesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in mesh.triangles.tolist():
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def load_hdri(path) -> HdriEnvironment:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    with Image.open(path) as im:
        w, h = im.size
        if w != 2 * h:
            raise AspectError(f"{path}: equirectangular map must be 2:1, got {w}x{h}")
        px = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return HdriEnvironment(px, 0.0, os.path.basename(path))


# -- procedural geometry -------------------------------------------------------


class _Builder:
    def __init__(self):
        self.verts: list = []
        self.tris: list = []

    def add(self, verts, tris, matrix=None, offset=(0.0, 0.0, 0.0)):
        v = np.asarray(verts, dtype=np.float64)
        if matrix is not None:
            v = v @ np.asarray(matrix).T
        v = v + np.asarray(offset)
        base = sum(len(x) for x in self.verts)
        self.verts.append(v)
        self.tris.append(np.asarray(tris, dtype=np.int64) + base)

    def box(self, size, offset=(0, 0, 0), matrix=None):
        self.add(*_box(*size), matrix=matrix, offset=offset)

    def cylinder(self, radius, height, offset=(0, 0, 0), matrix=None, segments=SEGMENTS):
        self.add(*_cylinder(radius, height, segments), matrix=matrix, offset=offset)

    def build(self, color, kind) -> Mesh:
        return Mesh(np.concatenate(self.verts), np.concatenate(self.tris), color, kind)


def _box(sx, sy, sz):
    hx, hy, hz = sx / 2, sy / 2, sz / 2
    v = [
        (-hx, -hy, -hz), (hx, -hy, -hz), (hx, hy, -hz), (-hx, hy, -hz),
        (-hx, -hy, hz), (hx, -hy, hz), (hx, hy, hz), (-hx, hy, hz),
    ]
    t = [
        (0, 2, 1), (0, 3, 2),  # bottom
        (4, 5, 6), (4, 6, 7),  # top
        (0, 1, 5), (0, 5, 4),
        (1, 2, 6), (1, 6, 5),
        (2, 3, 7), (2, 7, 6),
        (3, 0, 4), (3, 4, 7),
    ]
    return v, t


def _ring(radius, z, segments):
    a = 2 * np.pi * np.arange(segments) / segments
    return np.stack([radius * np.cos(a), radius * np.sin(a), np.full(segments, z)], axis=1)


def _cylinder(radius, height, segments):
    n = segments
    v = np.concatenate([_ring(radius, -height / 2, n), _ring(radius, height / 2, n),
                        [[0, 0, -height / 2], [0, 0, height / 2]]])
    t = []
    for i in range(n):
        j = (i + 1) % n
        t += [(i, j, n + j), (i, n + j, n + i)]
        t.append((2 * n, j, i))
        t.append((2 * n + 1, n + i, n + j))
    return v, t


def _cone(radius, height, segments):
    n = segments
    v = np.concatenate([_ring(radius, -height / 2, n), [[0, 0, height / 2], [0, 0, -height / 2]]])
    t = []
    for i in range(n):
        j = (i + 1) % n
        t.append((i, j, n))
        t.append((n + 1, j, i))
    return v, t


def _sphere(radius, segments, rings):
    v = [[0.0, 0.0, radius]]
    for r in range(1, rings):
        theta = np.pi * r / rings
        ring = _ring(radius * np.sin(theta), radius * np.cos(theta), segments)
        v.extend(ring.tolist())
    v.append([0.0, 0.0, -radius])
    n = segments
    south = len(v) - 1
    t = []
    for i in range(n):
        t.append((0, 1 + i, 1 + (i + 1) % n))
    for r in range(rings - 2):
        a0 = 1 + r * n
        b0 = a0 + n
        for i in range(n):
            j = (i + 1) % n
            t += [(a0 + i, b0 + i, b0 + j), (a0 + i, b0 + j, a0 + j)]
    last = 1 + (rings - 2) * n
    for i in range(n):
        t.append((south, last + (i + 1) % n, last + i))
    return np.array(v), t


def make_primitive(kind: str, size: float, color=(0.5, 0.5, 0.5)) -> Mesh:
    """Watertight primitive centred on the origin; ``size`` is edge length or diameter/height."""
    if not size > 0:
        raise InvalidSize(f"primitive size must be positive, got {size}")
    if kind == "cube":
        v, t = _box(size, size, size)
    elif kind == "sphere":
        v, t = _sphere(size / 2, SEGMENTS, SPHERE_RINGS)
    elif kind == "cylinder":
        v, t = _cylinder(size / 2, size, SEGMENTS)
    elif kind == "cone":
        v, t = _cone(size / 2, size, SEGMENTS)
    else:
        raise ValueError(f"unknown primitive kind {kind!r}")
    return Mesh(np.asarray(v, dtype=np.float64), t, color, kind)


def _rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def _rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


# body (x, y, z), arm length, arm angle (deg from +X), rotor radius, rotor thickness, colour
_DRONE_PARAMS = {
    "phantom": dict(body=(0.14, 0.14, 0.08), arm=0.17, arm_angle=45, rotor=0.060, disc=0.006, color=(0.92, 0.92, 0.92)),
    "inspire": dict(body=(0.18, 0.10, 0.07), arm=0.20, arm_angle=35, rotor=0.070, disc=0.006, color=(0.55, 0.55, 0.58)),
    "mavic_a": dict(body=(0.20, 0.08, 0.06), arm=0.13, arm_angle=50, rotor=0.055, disc=0.005, color=(0.25, 0.25, 0.27)),
    "mavic_b": dict(body=(0.22, 0.09, 0.07), arm=0.14, arm_angle=40, rotor=0.060, disc=0.005, color=(0.38, 0.38, 0.36)),
    "fpv": dict(body=(0.10, 0.06, 0.05), arm=0.15, arm_angle=45, rotor=0.065, disc=0.008, color=(0.12, 0.12, 0.12)),
}


def _center_and_scale(mesh: Mesh, diagonal: float) -> Mesh:
    lo, hi = mesh.bounds
    v = mesh.vertices - (lo + hi) / 2
    extent = hi - lo
    v = v * (diagonal / math.hypot(extent[0], extent[1]))
    return Mesh(v, mesh.triangles, mesh.base_color, mesh.kind)


def make_drone(model: str) -> Mesh:
    """Stand-in multirotor: body, four arms, motor pods and rotor discs.

    The geometry is point-symmetric about the origin, so every silhouette is
    centred on the projected origin.  Models are scaled to a 0.35 m
    horizontal diagonal.
    """
    p = _DRONE_PARAMS[model]
    b = _Builder()
    bx, by, bz = p["body"]
    b.box((bx, by, bz))
    arm_t = 0.02
    ang = math.radians(p["arm_angle"])
    for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
        dx, dy = sx * math.cos(ang), sy * math.sin(ang)
        reach = p["arm"]
        b.box((reach, arm_t, arm_t), offset=(dx * reach / 2, dy * reach / 2, 0), matrix=_rot_z(math.atan2(dy, dx)))
        tip = (dx * reach, dy * reach, 0.0)
        b.cylinder(0.016, 0.04, offset=tip)
        b.cylinder(p["rotor"], p["disc"], offset=tip)
    return _center_and_scale(b.build(p["color"], model), DRONE_DIAGONAL)


def drone_library() -> list:
    return [make_drone(m) for m in DRONE_MODELS]


def make_bird(wingspan: float = 0.5, color=(0.30, 0.26, 0.22)) -> Mesh:
    """Low-poly bird: a diamond body and two swept wing triangles, nose along +X."""
    s = wingspan
    v = [
        (0.22 * s, 0, 0), (-0.25 * s, 0, 0),  # nose, tail
        (0, 0.04 * s, 0), (0, -0.04 * s, 0),  # body sides
        (0, 0, 0.035 * s), (0, 0, -0.035 * s),  # body top/bottom
        (0.06 * s, 0.03 * s, 0.005 * s), (-0.08 * s, 0.03 * s, 0.005 * s), (-0.05 * s, 0.5 * s, 0.02 * s),
        (0.06 * s, -0.03 * s, 0.005 * s), (-0.08 * s, -0.03 * s, 0.005 * s), (-0.05 * s, -0.5 * s, 0.02 * s),
        (-0.25 * s, 0.07 * s, 0), (-0.25 * s, -0.07 * s, 0), (-0.36 * s, 0, 0),
    ]
    t = [
        (0, 2, 4), (0, 4, 3), (0, 5, 2), (0, 3, 5),
        (1, 4, 2), (1, 3, 4), (1, 2, 5), (1, 5, 3),
        (6, 7, 8), (9, 11, 10),
        (12, 14, 13),
    ]
    return Mesh(np.array(v, dtype=np.float64), t, color, "bird")


def make_prop(kind: str, color=(0.5, 0.5, 0.5)) -> Mesh:
    """Street-furniture distractors built from boxes and cylinders (metres, base at z=0)."""
    b = _Builder()
    if kind == "car":
        b.box((4.2, 1.8, 0.8), offset=(0, 0, 0.75))
        b.box((2.2, 1.6, 0.6), offset=(-0.2, 0, 1.45))
        for x in (-1.35, 1.35):
            for y in (-0.8, 0.8):
                b.cylinder(0.33, 0.22, offset=(x, y, 0.33), matrix=_rot_x(math.pi / 2))
    elif kind == "lamppost":
        b.cylinder(0.08, 6.0, offset=(0, 0, 3.0))
        b.box((1.2, 0.08, 0.08), offset=(0.6, 0, 5.9))
        b.box((0.5, 0.25, 0.15), offset=(1.15, 0, 5.8))
    elif kind == "traffic_cone":
        b.add(*_cone(0.18, 0.7, SEGMENTS), offset=(0, 0, 0.38))
        b.box((0.42, 0.42, 0.03), offset=(0, 0, 0.015))
    elif kind == "traffic_sign":
        b.cylinder(0.035, 2.2, offset=(0, 0, 1.1))
        b.box((0.7, 0.04, 0.7), offset=(0, 0.04, 2.3))
    else:
        raise ValueError(f"unknown prop kind {kind!r}")
    return b.build(color, kind)


def merge_meshes(meshes: Sequence[Mesh], color=None, kind="merged") -> Mesh:
    b = _Builder()
    for m in meshes:
        b.add(m.vertices, m.triangles)
    return b.build(color if color is not None else meshes[0].base_color, kind)
