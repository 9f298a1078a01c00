"""Dataset generation: frames -> images/, ids/, masks/, annotations.json."""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

from . import __version__
from .annotator import CATEGORY_IDS, DatasetManifest, ImageRecord, annotate_frame, colorize_mask, write_dataset
from .errors import ConfigError, IoError
from .randomizer import GenerationConfig, build_frame, load_config
from .renderer import rasterize, read_id_png, write_render

log = logging.getLogger(__name__)

HASH_FILE = "manifest.sha256"
ANNOTATIONS = "annotations.json"


@dataclass(frozen=True)
class FrameJob:
    config: GenerationConfig
    local_index: int
    image_id: int


def load_config_parts(path) -> list:
    """A config file holds one GenerationConfig or ``{"concat": [paths...]}``."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if isinstance(data, dict) and "concat" in data:
        extra = set(data) - {"concat"}
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown key next to 'concat'")
        base = os.path.dirname(os.path.abspath(path))
        if not isinstance(data["concat"], list) or not data["concat"]:
            raise ConfigError("concat", "expected a non-empty list of config paths")
        parts = []
        for p in data["concat"]:
            parts.extend(load_config_parts(os.path.join(base, p)))
        return parts
    return [load_config(path)]


def plan_frames(parts, frames=None) -> list:
    """Frame jobs for every part in order, optionally truncated to ``frames``."""
    jobs = []
    for cfg in parts:
        for i in range(cfg.dataset_size):
            jobs.append(FrameJob(cfg, i, len(jobs)))
    return jobs if frames is None else jobs[:frames]


def _names(image_id: int):
    stem = f"{image_id:06d}"
    return f"images/{stem}.png", f"ids/{stem}.png", f"masks/{stem}.png"


def render_job(job: FrameJob, out_dir: str, backend=None) -> None:
    frame = build_frame(job.config.master_seed, job.local_index, job.config)
    out = rasterize(frame, backend=backend)
    img_name, ids_name, mask_name = _names(job.image_id)
    cats = frame.categories()
    write_render(out, os.path.join(out_dir, img_name), os.path.join(out_dir, ids_name), cats)
    Image.fromarray(colorize_mask(out.instance_ids, cats)).save(os.path.join(out_dir, mask_name), format="PNG")


def _render_star(args):
    render_job(*args)
    return args[0].image_id


def _digest(jobs) -> str:
    import hashlib

    h = hashlib.sha256(__version__.encode())
    seen = []
    for j in jobs:
        if j.config not in seen:
            seen.append(j.config)
    for cfg in seen:
        h.update(cfg.digest().encode())
    h.update(str(len(jobs)).encode())
    return h.hexdigest()


def _frame_done(out_dir, image_id) -> bool:
    img, ids, mask = _names(image_id)
    return all(os.path.isfile(os.path.join(out_dir, p)) for p in (img, ids, mask, ids[:-4] + ".json"))


def generate_dataset(parts, out_dir, frames=None, jobs: int = 1, include_birds: bool = False,
                     include_distractors: bool = False, min_pixels: int = 3, backend=None) -> DatasetManifest:
    """Render every planned frame (skipping finished ones on resume) and write the COCO file."""
    if isinstance(parts, GenerationConfig):
        parts = [parts]
    out_dir = os.fspath(out_dir)
    planned = plan_frames(parts, frames)
    digest = _digest(planned)
    try:
        for sub in ("images", "ids", "masks"):
            os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out_dir}: {exc}") from exc

    hash_path = os.path.join(out_dir, HASH_FILE)
    resumable = os.path.isfile(hash_path) and open(hash_path, encoding="utf-8").read().split()[:1] == [digest]
    todo = [j for j in planned if not (resumable and _frame_done(out_dir, j.image_id))]
    if len(todo) < len(planned):
        log.info("resuming: %d of %d frames already rendered", len(planned) - len(todo), len(planned))
    with open(hash_path, "w", encoding="utf-8") as fh:
        fh.write(f"{digest}  pending\n")

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for _ in pool.map(_render_star, [(j, out_dir, backend) for j in todo], chunksize=4):
                pass
    else:
        for j in todo:
            render_job(j, out_dir, backend)

    styles = {j.config.style for j in planned}
    categories = [{"id": CATEGORY_IDS["drone"], "name": "drone"}]
    if "drones_birds" in styles and include_birds:
        categories.append({"id": CATEGORY_IDS["bird"], "name": "bird"})
    if styles & {"generic_distractors", "realistic_distractors"} and include_distractors:
        categories.append({"id": CATEGORY_IDS["distractor"], "name": "distractor"})

    images, annotations = [], []
    for j in planned:
        img_name, ids_name, _ = _names(j.image_id)
        ids, cats = read_id_png(os.path.join(out_dir, ids_name))
        images.append(ImageRecord(j.image_id, img_name, ids.shape[1], ids.shape[0]))
        annotations.extend(annotate_frame(j.image_id, ids, cats, min_pixels, len(annotations) + 1))
    keep = {c["name"] for c in categories}
    annotations = [a for a in annotations if a.category in keep]
    annotations = [_renumber(a, i + 1) for i, a in enumerate(annotations)]

    seeds = sorted({j.config.master_seed for j in planned})
    provenance = {"config_hash": digest, "master_seed": seeds[0] if len(seeds) == 1 else seeds,
                  "generator": f"sdrforge {__version__}"}
    manifest = DatasetManifest(images, annotations, categories, provenance)
    write_dataset(manifest, include_birds, include_distractors, out_dir, ANNOTATIONS)
    with open(hash_path, "w", encoding="utf-8") as fh:
        fh.write(f"{digest}  {ANNOTATIONS}\n")
    return manifest


def _renumber(a, new_id):
    from dataclasses import replace

    return a if a.annotation_id == new_id else replace(a, annotation_id=new_id)


# -- preview -------------------------------------------------------------------


def contact_sheet(dataset_dir, out_path, cells: int = 3, cell_width: int = 320) -> str:
    """``cells x cells`` grid of the first frames (by image id) with ground-truth boxes drawn."""
    from .cocoio import read_ground_truth

    ann_path = os.path.join(os.fspath(dataset_dir), ANNOTATIONS)
    if not os.path.isfile(ann_path):
        raise IoError(f"{dataset_dir}: no {ANNOTATIONS}")
    manifest = read_ground_truth(ann_path)
    if not manifest.images:
        raise IoError(f"{dataset_dir}: dataset has no images")
    if cells < 1:
        raise IoError("--cells must be >= 1")
    chosen = sorted(manifest.images, key=lambda im: im.image_id)[: cells * cells]
    by_image = {}
    for a in manifest.annotations:
        by_image.setdefault(a.image_id, []).append(a)
    scale = cell_width / chosen[0].width
    cell_h = max(1, round(chosen[0].height * scale))
    sheet = Image.new("RGB", (cells * cell_width, cells * cell_h))
    for k, im in enumerate(chosen):
        with Image.open(os.path.join(dataset_dir, im.file_name)) as pil:
            thumb = pil.convert("RGB").resize((cell_width, cell_h), Image.BILINEAR)
        draw = ImageDraw.Draw(thumb)
        sx, sy = cell_width / im.width, cell_h / im.height
        for a in by_image.get(im.image_id, []):
            x, y, w, h = a.bbox
            color = (255, 0, 0) if a.category == "drone" else (255, 200, 0)
            draw.rectangle([math.floor(x * sx), math.floor(y * sy),
                            math.ceil((x + w) * sx) - 1, math.ceil((y + h) * sy) - 1], outline=color)
        sheet.paste(thumb, ((k % cells) * cell_width, (k // cells) * cell_h))
    sheet.save(out_path, format="PNG")
    return os.fspath(out_path)


def median_bbox_area(manifest: DatasetManifest, category: str = "drone") -> float:
    areas = [a.bbox[2] * a.bbox[3] for a in manifest.annotations if a.category == category]
    return float(np.median(areas)) if areas else 0.0
