"""Instance-id buffers to COCO ground truth: masks, tight boxes, RLE, mask images."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptyMask, IoError, UnknownId

CATEGORY_IDS = {"drone": 1, "bird": 2, "distractor": 3}
MASK_COLORS = {
    "drone": (255, 255, 255),
    "bird": (0, 0, 255),
    "distractor": (0, 255, 0),
}
MIN_ANNOTATION_PIXELS = 3


@dataclass(frozen=True)
class ImageRecord:
    image_id: int
    file_name: str
    width: int
    height: int


@dataclass(frozen=True)
class Annotation:
    annotation_id: int
    image_id: int
    category: str
    bbox: tuple  # (x, y, w, h) pixels
    area: float
    rle_mask: Optional[tuple] = None  # column-major counts, zeros first
    size: Optional[tuple] = None  # (h, w) of the RLE grid
    iscrowd: int = 0
    category_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))
        object.__setattr__(self, "area", float(self.area))
        if self.rle_mask is not None:
            object.__setattr__(self, "rle_mask", tuple(int(c) for c in self.rle_mask))
            object.__setattr__(self, "size", tuple(int(s) for s in self.size))
        if not self.category_id:
            object.__setattr__(self, "category_id", CATEGORY_IDS.get(self.category, 0))

    def decode(self) -> np.ndarray:
        if self.rle_mask is None:
            raise ValueError("annotation carries no mask")
        return decode_rle(self.rle_mask, self.size)


@dataclass
class DatasetManifest:
    images: list = field(default_factory=list)
    annotations: list = field(default_factory=list)
    categories: list = field(default_factory=list)  # [{"id": .., "name": ..}]
    provenance: dict = field(default_factory=dict)

    def category_names(self) -> dict:
        return {c["id"]: c["name"] for c in self.categories}


def extract_instances(instance_ids: np.ndarray, id_to_category: dict):
    """One boolean mask per distinct non-zero id, ordered by id."""
    present = np.unique(instance_ids)
    present = present[present != 0]
    missing = [int(i) for i in present if int(i) not in id_to_category]
    if missing:
        raise UnknownId(f"instance id(s) {missing} missing from the category map")
    return [(int(i), instance_ids == i) for i in present]


def mask_to_bbox(mask: np.ndarray) -> tuple:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if len(rows) == 0:
        raise EmptyMask("mask has no set pixels")
    return (int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def encode_rle(mask: np.ndarray) -> list:
    """Uncompressed COCO RLE: column-major run lengths, starting with a zero run."""
    flat = np.asarray(mask, dtype=bool).ravel(order="F")
    if flat.size == 0:
        return []
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return counts


def decode_rle(counts, size) -> np.ndarray:
    h, w = size
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, np.asarray(counts, dtype=np.int64))
    if flat.size != h * w:
        raise ValueError(f"RLE covers {flat.size} pixels, expected {h * w}")
    return flat.reshape((h, w), order="F")


def rle_area(counts) -> int:
    return int(sum(counts[1::2]))


def colorize_mask(instance_ids: np.ndarray, id_to_category: dict) -> np.ndarray:
    """Drones white, birds blue, distractors green, background black."""
    out = np.zeros(instance_ids.shape + (3,), dtype=np.uint8)
    for iid, mask in extract_instances(instance_ids, id_to_category):
        out[mask] = MASK_COLORS[id_to_category[iid]]
    return out


def annotate_frame(image_id: int, instance_ids: np.ndarray, id_to_category: dict,
                   min_pixels: int = MIN_ANNOTATION_PIXELS, first_annotation_id: int = 1) -> list:
    """Annotations for every instance with at least ``min_pixels`` visible pixels."""
    anns = []
    size = instance_ids.shape
    for iid, mask in extract_instances(instance_ids, id_to_category):
        area = int(mask.sum())
        if area < min_pixels:
            continue
        anns.append(
            Annotation(
                annotation_id=first_annotation_id + len(anns),
                image_id=image_id,
                category=id_to_category[iid],
                bbox=mask_to_bbox(mask),
                area=area,
                rle_mask=tuple(encode_rle(mask)),
                size=size,
            )
        )
    return anns


# -- COCO document -------------------------------------------------------------


def annotation_to_coco(a: Annotation) -> dict:
    d = {
        "id": a.annotation_id,
        "image_id": a.image_id,
        "category_id": a.category_id,
        "bbox": [float(v) for v in a.bbox],
        "area": float(a.area),
        "iscrowd": a.iscrowd,
    }
    if a.rle_mask is not None:
        d["segmentation"] = {"counts": list(a.rle_mask), "size": list(a.size)}
    return d


def manifest_to_coco(manifest: DatasetManifest, include_birds: bool = True, include_distractors: bool = True) -> dict:
    drop = set()
    if not include_birds:
        drop.add("bird")
    if not include_distractors:
        drop.add("distractor")
    names = manifest.category_names()
    cats = [c for c in manifest.categories if c["name"] not in drop]
    anns = [a for a in manifest.annotations if names.get(a.category_id, a.category) not in drop]
    doc = {}
    if manifest.provenance:
        doc["provenance"] = manifest.provenance
    doc["images"] = [
        {"id": im.image_id, "file_name": im.file_name, "width": im.width, "height": im.height}
        for im in manifest.images
    ]
    doc["annotations"] = [annotation_to_coco(a) for a in anns]
    doc["categories"] = [dict(c) for c in cats]
    return doc


def dumps_coco(doc) -> str:
    return json.dumps(doc, separators=(",", ":"), allow_nan=False) + "\n"


def write_dataset(manifest: DatasetManifest, include_birds: bool, include_distractors: bool,
                  out_dir, file_name: str = "annotations.json") -> str:
    """Write the COCO ground truth; byte-identical for identical manifests."""
    path = os.path.join(os.fspath(out_dir), file_name)
    text = dumps_coco(manifest_to_coco(manifest, include_birds, include_distractors))
    try:
        os.makedirs(os.fspath(out_dir), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path
