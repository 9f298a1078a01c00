"""Structured domain randomisation: turns ``(config, seed, frame index)`` into a scene.

All randomness is drawn from :func:`sdrforge.rng.substream` keyed by the
master seed, the segment or frame, and a purpose tag, so any frame can be
built on its own and always comes out the same.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Union

import numpy as np

from .camera import CameraSpec, project_points
from .errors import ConfigError, EmptyLibrary, StyleMismatch
from .renderer import BackgroundImage
from .rng import key_hex, substream
from .scene import (
    DRONE_MODELS,
    PRIMITIVE_KINDS,
    PROP_KINDS,
    HdriEnvironment,
    Mesh,
    Pose,
    SceneEntity,
    Trajectory,
    Vec3,
    load_hdri,
    make_bird,
    make_drone,
    make_primitive,
    make_prop,
    quat_from_yaw,
)

STYLES = ("drones_only", "drones_birds", "generic_distractors", "realistic_distractors", "random_backgrounds")
BUILTIN_HDRIS = tuple(f"builtin:sky_{i:02d}" for i in range(8))

FLIGHT_BOX_MIN = np.array([-50.0, -50.0, 10.0])
FLIGHT_BOX_MAX = np.array([50.0, 50.0, 110.0])
DISTRACTOR_HALF_EXTENT = 60.0
FORMATION_SPACING = 4.0
FORMATION_JITTER = 0.2  # fraction of spacing, per axis
BOB_AMPLITUDE = 0.15
MIN_ALTITUDE = 0.5
CAMERA_RESAMPLES = 8
FLAP_PERIOD = 6
FLAP_SCALE = 0.8


@dataclass(frozen=True)
class GenerationConfig:
    style: str = "drones_only"
    camera_bound_B: float = 40.0
    focal_range: tuple = (15.0, 300.0)
    dataset_size: int = 5000
    segment_length: int = 300
    master_seed: int = 0
    image_width: int = 640
    image_height: int = 480
    drones_per_scene: tuple = (1, 5)
    hdri_library: tuple = BUILTIN_HDRIS

    def __post_init__(self):
        object.__setattr__(self, "focal_range", tuple(float(v) for v in self.focal_range))
        object.__setattr__(self, "drones_per_scene", tuple(int(v) for v in self.drones_per_scene))
        object.__setattr__(self, "hdri_library", tuple(str(p) for p in self.hdri_library))
        if self.style not in STYLES:
            raise ConfigError("style", f"must be one of {', '.join(STYLES)}; got {self.style!r}")
        if not self.camera_bound_B > 0:
            raise ConfigError("camera_bound_B", "must be > 0")
        if len(self.focal_range) != 2 or not 0 < self.focal_range[0] < self.focal_range[1]:
            raise ConfigError("focal_range", "must be [min, max] with 0 < min < max")
        if self.dataset_size < 1:
            raise ConfigError("dataset_size", "must be >= 1")
        if self.segment_length < 1:
            raise ConfigError("segment_length", "must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed", "must be an unsigned 64-bit integer")
        if self.image_width < 1 or self.image_height < 1:
            raise ConfigError("image_width", "image dimensions must be >= 1")
        lo_hi = self.drones_per_scene
        if len(lo_hi) != 2 or lo_hi[0] < 1 or lo_hi[1] < lo_hi[0]:
            raise ConfigError("drones_per_scene", "must be [min, max] with 1 <= min <= max")
        if self.style != "random_backgrounds" and not self.hdri_library:
            raise ConfigError("hdri_library", "must list at least one environment map")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["focal_range"] = list(self.focal_range)
        d["drones_per_scene"] = list(self.drones_per_scene)
        d["hdri_library"] = list(self.hdri_library)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace(self, **changes) -> "GenerationConfig":
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return GenerationConfig(**d)


_FIELD_TYPES = {
    "style": str,
    "camera_bound_B": (int, float),
    "focal_range": list,
    "dataset_size": int,
    "segment_length": int,
    "master_seed": int,
    "image_width": int,
    "image_height": int,
    "drones_per_scene": list,
    "hdri_library": list,
}


def config_from_dict(data: dict, base_dir=None) -> GenerationConfig:
    """Strict parse: unknown keys and wrongly typed values raise :class:`ConfigError`."""
    if not isinstance(data, dict):
        raise ConfigError("$", "config must be a JSON object")
    for key, value in data.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(key, "unknown configuration key")
        expected = _FIELD_TYPES[key]
        if isinstance(value, bool) or not isinstance(value, expected):
            raise ConfigError(key, f"expected {getattr(expected, '__name__', 'number')}, got {type(value).__name__}")
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(key, "must be finite")
        if key in ("focal_range", "drones_per_scene"):
            if len(value) != 2:
                raise ConfigError(key, "expected a two-element list")
            for i, v in enumerate(value):
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise ConfigError(f"{key}[{i}]", "expected a finite number")
        if key == "hdri_library":
            for i, v in enumerate(value):
                if not isinstance(v, str):
                    raise ConfigError(f"hdri_library[{i}]", "expected a path string")
    data = dict(data)
    if base_dir is not None and "hdri_library" in data:
        data["hdri_library"] = [
            p if p.startswith("builtin:") or os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))
            for p in data["hdri_library"]
        ]
    return GenerationConfig(**data)


def load_config(path) -> GenerationConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data, os.path.dirname(os.path.abspath(path)))


def _reject_constant(name):
    raise ConfigError("$", f"non-finite number {name} is not allowed")


@dataclass(frozen=True)
class FrameEntity:
    instance_id: int
    category: str
    mesh: Mesh
    pose: Pose


@dataclass(frozen=True, eq=False)
class SceneFrame:
    frame_index: int
    segment_index: int
    entities: tuple
    camera: CameraSpec
    environment: Union[HdriEnvironment, BackgroundImage]
    rng_trace: dict = field(default_factory=dict)
    empty_of_target: bool = False

    def categories(self) -> dict:
        return {e.instance_id: e.category for e in self.entities}


# -- environments --------------------------------------------------------------


def resolve_hdri(entry: str) -> str:
    if entry.startswith("builtin:"):
        name = entry.split(":", 1)[1]
        return str(resources.files("sdrforge") / "data" / "hdri" / f"{name}.png")
    return entry


@lru_cache(maxsize=64)
def _load_env(path: str) -> HdriEnvironment:
    return load_hdri(resolve_hdri(path))


def select_environment(master_seed: int, segment_index: int, config: GenerationConfig) -> HdriEnvironment:
    """One map per segment, chosen uniformly, with a uniform yaw in [0, 2*pi)."""
    if not config.hdri_library:
        raise EmptyLibrary("hdri_library is empty")
    rng = substream(master_seed, "segment", segment_index, "environment")
    choice = int(rng.integers(len(config.hdri_library)))
    yaw = float(rng.uniform(0.0, 2 * math.pi))
    return _load_env(config.hdri_library[choice]).rotated(yaw)


# -- paths ---------------------------------------------------------------------


def _formation_offsets(rng: np.random.Generator, n: int) -> np.ndarray:
    side = math.ceil(math.sqrt(n))
    grid = np.array([(i % side, i // side, 0) for i in range(n)], dtype=np.float64)
    grid -= grid.mean(axis=0)
    jitter = rng.uniform(-FORMATION_JITTER, FORMATION_JITTER, size=(n, 3))
    return (grid + jitter) * FORMATION_SPACING


def generate_swarm_path(master_seed: int, segment_index: int, n_drones: int, segment_length: int, tag: str = "drones"):
    """Cubic Bezier flight from a random start to a random end inside the flight box.

    Each member follows the shared path at a fixed formation offset plus a
    small vertical bob.  Grid neighbours sit 4 m apart and jitter moves each
    member at most 0.8 m per axis, so members stay at least 2.4 m apart.
    """
    rng = substream(master_seed, "segment", segment_index, tag, "path")
    start = rng.uniform(FLIGHT_BOX_MIN, FLIGHT_BOX_MAX)
    end = rng.uniform(FLIGHT_BOX_MIN, FLIGHT_BOX_MAX)
    span = end - start
    c1 = np.clip(start + span / 3 + rng.uniform(-15, 15, 3), FLIGHT_BOX_MIN, FLIGHT_BOX_MAX)
    c2 = np.clip(start + 2 * span / 3 + rng.uniform(-15, 15, 3), FLIGHT_BOX_MIN, FLIGHT_BOX_MAX)
    offsets = _formation_offsets(rng, n_drones)
    phases = rng.uniform(0, 2 * math.pi, n_drones)

    s = np.linspace(0.0, 1.0, segment_length)[:, None] if segment_length > 1 else np.zeros((1, 1))
    u = 1 - s
    path = u**3 * start + 3 * u**2 * s * c1 + 3 * u * s**2 * c2 + s**3 * end
    tangent = 3 * u**2 * (c1 - start) + 6 * u * s * (c2 - c1) + 3 * s**2 * (end - c2)
    yaw = np.arctan2(tangent[:, 1], tangent[:, 0])
    rotations = np.array([quat_from_yaw(a) for a in yaw])
    frames = np.arange(segment_length)

    out = []
    for k in range(n_drones):
        pos = path + offsets[k]
        pos[:, 2] += BOB_AMPLITUDE * np.sin(2 * math.pi * frames / 60.0 + phases[k])
        out.append(Trajectory(pos, rotations.copy(), np.ones(segment_length)))
    return out


def _flap(traj: Trajectory, phase: int) -> Trajectory:
    up = ((np.arange(len(traj)) + phase) // FLAP_PERIOD) % 2 == 0
    return Trajectory(traj.positions, traj.rotations, np.where(up, 1.0, FLAP_SCALE))


# -- cameras -------------------------------------------------------------------


def sample_camera(
    master_seed: int,
    segment_index: int,
    frame_index: int,
    config: GenerationConfig,
    swarm_centroid,
    attempt: int = 0,
) -> CameraSpec:
    """Uniform position in the cube of half-extent B about the swarm (altitude >= 0.5 m)."""
    rng = substream(master_seed, "segment", segment_index, "frame", frame_index, "camera", attempt)
    b = config.camera_bound_B
    c = np.asarray(swarm_centroid, dtype=np.float64)
    x, y = c[:2] + rng.uniform(-b, b, 2)
    z_lo = max(c[2] - b, MIN_ALTITUDE)
    z_hi = c[2] + b
    z = rng.uniform(z_lo, z_hi) if z_hi > z_lo else z_lo
    focal = rng.uniform(*config.focal_range)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    radius = 0.1 * b * rng.uniform() ** (1 / 3)
    look = c + radius * direction
    return CameraSpec(Vec3(x, y, z), Vec3(*look), float(focal), 36.0, config.image_width, config.image_height)


# -- extras --------------------------------------------------------------------


def _random_quaternion(rng: np.random.Generator) -> tuple:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return tuple(q)


def place_distractors(master_seed: int, segment_index: int, style: str, config: GenerationConfig, first_id: int = 1):
    """Non-drone entities for the distractor and bird styles (static props or flying birds)."""
    if style not in ("generic_distractors", "realistic_distractors", "drones_birds"):
        raise StyleMismatch(f"style {style!r} has no distractors")
    L = config.segment_length
    rng = substream(master_seed, "segment", segment_index, "distractors", style)
    entities = []
    if style == "drones_birds":
        n = int(rng.integers(1, 6))
        bird = make_bird()
        for k, traj in enumerate(generate_swarm_path(master_seed, segment_index, n, L, tag="birds")):
            entities.append(SceneEntity(bird, "bird", _flap(traj, int(rng.integers(FLAP_PERIOD * 2))), first_id + k))
        return entities
    n = int(rng.integers(3, 13))
    centre = (FLIGHT_BOX_MIN + FLIGHT_BOX_MAX) / 2
    for k in range(n):
        color = tuple(rng.uniform(0, 1, 3))
        if style == "generic_distractors":
            kind = PRIMITIVE_KINDS[int(rng.integers(len(PRIMITIVE_KINDS)))]
            mesh = make_primitive(kind, float(rng.uniform(0.5, 5.0)), color)
        else:
            kind = PROP_KINDS[int(rng.integers(len(PROP_KINDS)))]
            mesh = make_prop(kind, color)
        pos = centre + rng.uniform(-DISTRACTOR_HALF_EXTENT, DISTRACTOR_HALF_EXTENT, 3)
        rot = _random_quaternion(rng)
        traj = Trajectory(np.tile(pos, (L, 1)), np.tile(rot, (L, 1)), np.ones(L))
        entities.append(SceneEntity(mesh, "distractor", traj, first_id + k))
    return entities


_BLENDS = ("normal", "multiply", "screen", "overlay")


def _blend(mode: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if mode == "normal":
        return np.broadcast_to(b, a.shape)
    if mode == "multiply":
        return a * b
    if mode == "screen":
        return 1 - (1 - a) * (1 - b)
    return np.where(a < 0.5, 2 * a * b, 1 - 2 * (1 - a) * (1 - b))


def synthesize_random_background(master_seed: int, frame_index: int, width: int, height: int) -> np.ndarray:
    """Palette-and-shapes backdrop (uint8 ``(H, W, 3)``) with per-shape blend modes."""
    rng = substream(master_seed, "frame", frame_index, "background")
    n_colors = int(rng.integers(3, 7))
    palette = rng.integers(0, 256, size=(n_colors, 3)) / 255.0
    img = np.empty((height, width, 3))
    img[:] = palette[0]
    extent = max(width, height)
    for _ in range(int(rng.integers(5, 51))):
        kind = int(rng.integers(3))
        color = palette[int(rng.integers(n_colors))]
        mode = _BLENDS[int(rng.integers(len(_BLENDS)))]
        cx = int(rng.integers(width)) + 0.5
        cy = int(rng.integers(height)) + 0.5
        rx, ry = rng.uniform(0.02, 0.35, 2) * extent + 0.5
        r0, r1 = max(int(cy - ry) - 1, 0), min(int(cy + ry) + 2, height)
        c0, c1 = max(int(cx - rx) - 1, 0), min(int(cx + rx) + 2, width)
        py, px = np.mgrid[r0:r1, c0:c1] + 0.5
        if kind == 0:
            mask = ((px - cx) / rx) ** 2 + ((py - cy) / ry) ** 2 <= 1.0
        elif kind == 1:
            mask = (np.abs(px - cx) <= rx) & (np.abs(py - cy) <= ry)
        else:
            a0 = rng.uniform(0, 2 * math.pi)
            angles = a0 + np.array([0.0, 2 * math.pi / 3, 4 * math.pi / 3]) + rng.uniform(-0.3, 0.3, 3)
            vx = cx + rx * np.cos(angles)
            vy = cy + ry * np.sin(angles)
            mask = np.ones(py.shape, dtype=bool)
            for i in range(3):
                j = (i + 1) % 3
                mask &= (vx[j] - vx[i]) * (py - vy[i]) - (vy[j] - vy[i]) * (px - vx[i]) >= 0
        window = img[r0:r1, c0:c1]
        window[mask] = _blend(mode, window[mask], color)
    return np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)


# -- frames --------------------------------------------------------------------


@dataclass(frozen=True)
class _Segment:
    drones: tuple
    extras: tuple
    environment: object


@lru_cache(maxsize=16)
def _segment(master_seed: int, segment_index: int, config: GenerationConfig) -> _Segment:
    rng = substream(master_seed, "segment", segment_index, "swarm")
    lo, hi = config.drones_per_scene
    n = int(rng.integers(lo, hi + 1))
    models = [DRONE_MODELS[int(i)] for i in rng.integers(len(DRONE_MODELS), size=n)]
    paths = generate_swarm_path(master_seed, segment_index, n, config.segment_length)
    drones = tuple(SceneEntity(_drone_mesh(m), "drone", p, k + 1) for k, (m, p) in enumerate(zip(models, paths)))
    extras = ()
    if config.style in ("drones_birds", "generic_distractors", "realistic_distractors"):
        extras = tuple(place_distractors(master_seed, segment_index, config.style, config, n + 1))
    env = None
    if config.style != "random_backgrounds":
        env = select_environment(master_seed, segment_index, config)
    return _Segment(drones, extras, env)


@lru_cache(maxsize=None)
def _drone_mesh(model: str) -> Mesh:
    return make_drone(model)


def _any_drone_visible(camera: CameraSpec, centres: np.ndarray) -> bool:
    x, y, _, ok = project_points(centres, camera)
    inside = ok & (x >= 0) & (x < camera.image_width) & (y >= 0) & (y < camera.image_height)
    return bool(inside.any())


def build_frame(master_seed: int, global_frame_index: int, config: GenerationConfig) -> SceneFrame:
    seg, local = divmod(int(global_frame_index), config.segment_length)
    segment = _segment(int(master_seed), seg, config)
    entities = tuple(
        FrameEntity(e.instance_id, e.category, e.mesh, e.trajectory.pose(local))
        for e in segment.drones + segment.extras
    )
    centres = np.array([segment_pos for segment_pos in (e.trajectory.positions[local] for e in segment.drones)])
    centroid = centres.mean(axis=0)
    trace = {
        "swarm": key_hex(master_seed, "segment", seg, "swarm"),
        "path": key_hex(master_seed, "segment", seg, "drones", "path"),
    }
    empty = True
    for attempt in range(CAMERA_RESAMPLES + 1):
        camera = sample_camera(master_seed, seg, global_frame_index, config, centroid, attempt)
        trace["camera"] = key_hex(master_seed, "segment", seg, "frame", global_frame_index, "camera", attempt)
        if _any_drone_visible(camera, centres):
            empty = False
            break
    if segment.environment is None:
        environment = BackgroundImage(
            synthesize_random_background(master_seed, global_frame_index, config.image_width, config.image_height)
        )
        trace["background"] = key_hex(master_seed, "frame", global_frame_index, "background")
    else:
        environment = segment.environment
        trace["environment"] = key_hex(master_seed, "segment", seg, "environment")
    if segment.extras:
        trace["distractors"] = key_hex(master_seed, "segment", seg, "distractors", config.style)
    return SceneFrame(global_frame_index, seg, entities, camera, environment, trace, empty)
