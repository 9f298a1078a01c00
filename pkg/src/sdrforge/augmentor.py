"""Offline JPEG re-compression and Gaussian noise on a seeded subset of a dataset."""
from __future__ import annotations

import io
import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
from PIL import Image

from .errors import AlreadyAugmented, ConfigError, IoError, ManifestMismatch
from .rng import substream

REPORT_NAME = "augmentation_report.json"


@dataclass(frozen=True)
class AugmentationPlan:
    jpeg_enabled: bool = True
    noise_enabled: bool = True
    subset_fraction: float = 0.5
    quality_range: tuple = (0, 95)
    noise_sigma_range: tuple = (0.0, 12.75)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "quality_range", tuple(int(q) for q in self.quality_range))
        object.__setattr__(self, "noise_sigma_range", tuple(float(s) for s in self.noise_sigma_range))
        if not 0.0 <= self.subset_fraction <= 1.0:
            raise ConfigError("subset_fraction", "must lie in [0, 1]")
        lo, hi = self.quality_range
        if not 0 <= lo <= hi <= 100:
            raise ConfigError("quality_range", "must satisfy 0 <= min <= max <= 100")
        lo, hi = self.noise_sigma_range
        if not 0.0 <= lo <= hi or not math.isfinite(hi):
            raise ConfigError("noise_sigma_range", "must satisfy 0 <= min <= max")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["quality_range"] = list(self.quality_range)
        d["noise_sigma_range"] = list(self.noise_sigma_range)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "AugmentationPlan":
        if not isinstance(data, dict):
            raise ConfigError("$", "plan must be a JSON object")
        known = {"jpeg_enabled", "noise_enabled", "subset_fraction", "quality_range", "noise_sigma_range", "seed"}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(key, "unknown plan key")
            if key.endswith("_enabled") and not isinstance(value, bool):
                raise ConfigError(key, "expected true or false")
            if key.endswith("_range") and not (isinstance(value, list) and len(value) == 2):
                raise ConfigError(key, "expected a two-element list")
        return cls(**data)


def load_plan(path) -> AugmentationPlan:
    with open(path, encoding="utf-8") as fh:
        return AugmentationPlan.from_dict(json.load(fh))


def select_subset(seed: int, image_ids, fraction: float) -> set:
    """``floor(fraction * N)`` ids taken from the front of a seeded shuffle."""
    ids = sorted(image_ids)
    k = math.floor(fraction * len(ids))
    perm = substream(seed, "augment", "subset").permutation(len(ids))
    return {ids[i] for i in perm[:k]}


def jpeg_compress(image: np.ndarray, quality: int) -> np.ndarray:
    """Baseline JPEG encode at ``quality`` then decode."""
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(buf, format="JPEG", quality=int(quality))
    buf.seek(0)
    with Image.open(buf) as im:
        return np.asarray(im.convert("RGB"))


def add_gaussian_noise(image: np.ndarray, sigma: float, seed: int, image_id: int = 0) -> np.ndarray:
    if sigma == 0:
        return np.array(image, copy=True)
    rng = substream(seed, "augment", "noise-field", image_id)
    noisy = np.asarray(image, dtype=np.float64) + rng.normal(0.0, sigma, size=np.shape(image))
    return np.clip(np.round(noisy), 0, 255).astype(np.uint8)


def draw_parameters(plan: AugmentationPlan, image_id: int) -> dict:
    rng = substream(plan.seed, "augment", "params", image_id)
    params = {}
    if plan.noise_enabled:
        params["noise_sigma"] = float(rng.uniform(*plan.noise_sigma_range))
    if plan.jpeg_enabled:
        lo, hi = plan.quality_range
        params["jpeg_quality"] = int(rng.integers(lo, hi + 1))
    return params


def apply_plan(plan: AugmentationPlan, dataset_dir, annotations_name: str = "annotations.json") -> dict:
    """Augment the selected images in place and write the JSON report.

    Noise is applied before JPEG.  JPEG-augmented images replace their PNG
    and the manifest ``file_name`` is updated; nothing else in the manifest
    changes.
    """
    from .annotator import DatasetManifest, ImageRecord, write_dataset
    from .cocoio import read_ground_truth

    dataset_dir = os.fspath(dataset_dir)
    ann_path = os.path.join(dataset_dir, annotations_name)
    if not os.path.isdir(dataset_dir) or not os.path.isfile(ann_path):
        raise IoError(f"{dataset_dir}: not a dataset directory (missing {annotations_name})")
    report_path = os.path.join(dataset_dir, REPORT_NAME)
    if os.path.exists(report_path):
        with open(report_path, encoding="utf-8") as fh:
            previous = json.load(fh)
        if previous.get("applied"):
            raise AlreadyAugmented(f"{dataset_dir} was already augmented (see {REPORT_NAME})")

    manifest = read_ground_truth(ann_path)
    missing = [im.file_name for im in manifest.images if not os.path.isfile(os.path.join(dataset_dir, im.file_name))]
    if missing:
        raise ManifestMismatch(f"{len(missing)} image(s) missing, first: {missing[0]}")

    selected = select_subset(plan.seed, [im.image_id for im in manifest.images], plan.subset_fraction)
    entries = []
    images = []
    for im in manifest.images:
        if im.image_id not in selected or not (plan.jpeg_enabled or plan.noise_enabled):
            images.append(im)
            continue
        params = draw_parameters(plan, im.image_id)
        src = os.path.join(dataset_dir, im.file_name)
        with Image.open(src) as pil:
            pixels = np.asarray(pil.convert("RGB"))
        ops = []
        if "noise_sigma" in params:
            pixels = add_gaussian_noise(pixels, params["noise_sigma"], plan.seed, im.image_id)
            ops.append("noise")
        file_name = im.file_name
        if "jpeg_quality" in params:
            file_name = os.path.splitext(im.file_name)[0] + ".jpg"
            buf = io.BytesIO()
            Image.fromarray(pixels).save(buf, format="JPEG", quality=params["jpeg_quality"])
            _write_bytes(os.path.join(dataset_dir, file_name), buf.getvalue())
            if file_name != im.file_name:
                os.remove(src)
            ops.append("jpeg")
        else:
            Image.fromarray(pixels).save(src, format="PNG")
        images.append(ImageRecord(im.image_id, file_name, im.width, im.height))
        entries.append({"image_id": im.image_id, "file_name": file_name, "operations": ops, **params})

    names = {c["name"] for c in manifest.categories}
    updated = DatasetManifest(images, manifest.annotations, manifest.categories, manifest.provenance)
    write_dataset(updated, "bird" in names, "distractor" in names, dataset_dir, annotations_name)
    report = {"applied": True, "plan": plan.to_dict(), "n_images": len(manifest.images),
              "n_modified": len(entries), "images": entries}
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    return report


def _write_bytes(path, data: bytes):
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
