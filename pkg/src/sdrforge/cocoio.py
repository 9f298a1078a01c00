"""Strict readers and writers for COCO ground-truth and results files."""
from __future__ import annotations

import json
import math
import os

from .annotator import Annotation, DatasetManifest, ImageRecord, dumps_coco, manifest_to_coco, rle_area
from .errors import IntegrityError, IoError, ParseError, RangeError
from .metrics import Detection

_TOP_KEYS = {"info", "licenses", "images", "annotations", "categories", "provenance"}
_IMAGE_KEYS = {"id", "file_name", "width", "height"}
_ANN_KEYS = {"id", "image_id", "category_id", "bbox", "area", "segmentation", "iscrowd"}
_CAT_KEYS = {"id", "name", "supercategory"}
_RESULT_KEYS = {"image_id", "category_id", "bbox", "score"}


def _reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def load_json(path):
    """``json.load`` that refuses NaN/Infinity and reports byte offsets on failure."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, offset=exc.pos) from None
    except ValueError as exc:
        raise ParseError(str(exc), path) from None


def _check_keys(obj, allowed, where, strict):
    if not isinstance(obj, dict):
        raise IntegrityError(f"{where}: expected an object")
    if strict:
        extra = set(obj) - allowed
        if extra:
            raise IntegrityError(f"{where}: unknown key(s) {sorted(extra)}")


def _int(obj, key, where):
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise IntegrityError(f"{where}: '{key}' must be an integer")
    return v


def _bbox(v, where, error=IntegrityError):
    if not isinstance(v, list) or len(v) != 4:
        raise error(f"{where}: bbox must be an array of 4 numbers")
    if any(isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) for x in v):
        raise error(f"{where}: bbox values must be finite numbers")
    if v[2] <= 0 or v[3] <= 0:
        raise error(f"{where}: bbox width and height must be positive")
    return tuple(float(x) for x in v)


def parse_ground_truth(doc, strict: bool = True, source: str = "<memory>") -> DatasetManifest:
    _check_keys(doc, _TOP_KEYS, source, strict)
    for key in ("images", "annotations", "categories"):
        if not isinstance(doc.get(key), list):
            raise IntegrityError(f"{source}: '{key}' must be an array")

    categories = []
    for i, c in enumerate(doc["categories"]):
        where = f"categories[{i}]"
        _check_keys(c, _CAT_KEYS, where, strict)
        cid = _int(c, "id", where)
        if not isinstance(c.get("name"), str):
            raise IntegrityError(f"{where}: 'name' must be a string")
        entry = {"id": cid, "name": c["name"]}
        if "supercategory" in c:
            entry["supercategory"] = c["supercategory"]
        categories.append(entry)
    cat_names = {c["id"]: c["name"] for c in categories}
    if len(cat_names) != len(categories):
        raise IntegrityError("duplicate category ids")

    images = []
    for i, im in enumerate(doc["images"]):
        where = f"images[{i}]"
        _check_keys(im, _IMAGE_KEYS, where, strict)
        images.append(
            ImageRecord(_int(im, "id", where), str(im.get("file_name", "")), _int(im, "width", where), _int(im, "height", where))
        )
    image_ids = {im.image_id for im in images}
    if len(image_ids) != len(images):
        raise IntegrityError("duplicate image ids")

    annotations, seen = [], set()
    for i, a in enumerate(doc["annotations"]):
        where = f"annotations[{i}]"
        _check_keys(a, _ANN_KEYS, where, strict)
        aid = _int(a, "id", where)
        if aid in seen:
            raise IntegrityError(f"{where}: duplicate annotation id {aid}")
        seen.add(aid)
        image_id = _int(a, "image_id", where)
        if image_id not in image_ids:
            raise IntegrityError(f"{where}: image_id {image_id} does not exist")
        cid = _int(a, "category_id", where)
        if cid not in cat_names:
            raise IntegrityError(f"{where}: category_id {cid} does not exist")
        bbox = _bbox(a.get("bbox"), where)
        rle, size = None, None
        seg = a.get("segmentation")
        if isinstance(seg, dict):
            counts, size = seg.get("counts"), seg.get("size")
            if not isinstance(counts, list) or not all(isinstance(c, int) and c >= 0 for c in counts):
                if strict:
                    raise IntegrityError(f"{where}: only uncompressed integer RLE counts are supported")
                counts = None
            if counts is not None:
                if not (isinstance(size, list) and len(size) == 2) or sum(counts) != size[0] * size[1]:
                    raise IntegrityError(f"{where}: RLE counts do not cover size {size}")
                rle = tuple(counts)
        area = float(rle_area(rle)) if rle is not None else bbox[2] * bbox[3]
        iscrowd = a.get("iscrowd", 0)
        if iscrowd not in (0, 1):
            raise IntegrityError(f"{where}: iscrowd must be 0 or 1")
        annotations.append(
            Annotation(aid, image_id, cat_names[cid], bbox, area, rle, size if rle is not None else None, int(iscrowd), cid)
        )
    provenance = doc.get("provenance", {})
    if not isinstance(provenance, dict):
        raise IntegrityError("provenance must be an object")
    return DatasetManifest(images, annotations, categories, dict(provenance))


def read_ground_truth(path, strict: bool = True) -> DatasetManifest:
    return parse_ground_truth(load_json(path), strict, os.fspath(path))


def write_ground_truth(manifest: DatasetManifest, path) -> None:
    _write_text(path, dumps_coco(manifest_to_coco(manifest)))


def parse_results(doc, strict: bool = True) -> list:
    if not isinstance(doc, list):
        raise ParseError("results file must be a JSON array")
    out = []
    for i, r in enumerate(doc):
        where = f"results[{i}]"
        _check_keys(r, _RESULT_KEYS, where, strict)
        score = r.get("score")
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise IntegrityError(f"{where}: 'score' must be a number")
        if not 0.0 <= score <= 1.0:
            raise RangeError(f"{where}: score {score} outside [0, 1]")
        out.append(
            Detection(_int(r, "image_id", where), _int(r, "category_id", where), _bbox(r.get("bbox"), where, RangeError), score)
        )
    return out


def read_results(path, strict: bool = True) -> list:
    """Detections in file order (the order breaks score ties)."""
    return parse_results(load_json(path), strict)


def results_to_coco(detections) -> list:
    return [
        {"image_id": d.image_id, "category_id": d.category_id, "bbox": list(d.bbox), "score": d.score}
        for d in detections
    ]


def write_results(detections, path) -> None:
    _write_text(path, dumps_coco(results_to_coco(detections)))


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
