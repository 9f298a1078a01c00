"""Synthetic "oracle detector": ground-truth boxes shifted by seeded, recorded offsets.

Used to dry-run the evaluate/aggregate half of the pipeline without a
trained network::

    python -m sdrforge.oracle_detector --gt data/annotations.json --out pred.json --seed 3
"""
from __future__ import annotations

import argparse
import json

from .cocoio import read_ground_truth, write_results
from .metrics import Detection, default_categories
from .rng import substream


def jitter_detections(manifest, seed: int, max_offset: float = 2.0, score_range=(0.5, 1.0),
                      drop_fraction: float = 0.0):
    """One detection per scored ground truth, offset by up to ``max_offset`` pixels per coordinate.

    Returns ``(detections, offsets)`` where ``offsets[annotation_id] = (dx, dy, dw, dh)``.
    """
    cats = set(default_categories(manifest))
    dets, offsets = [], {}
    for a in manifest.annotations:
        if a.category_id not in cats:
            continue
        rng = substream(seed, "oracle", a.annotation_id)
        if rng.uniform() < drop_fraction:
            continue
        dx, dy, dw, dh = (float(v) for v in rng.uniform(-max_offset, max_offset, 4))
        x, y, w, h = a.bbox
        box = (x + dx, y + dy, max(w + dw, 0.5), max(h + dh, 0.5))
        offsets[a.annotation_id] = (dx, dy, box[2] - w, box[3] - h)
        dets.append(Detection(a.image_id, a.category_id, box, float(rng.uniform(*score_range))))
    return dets, offsets


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gt", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-offset", type=float, default=2.0)
    ap.add_argument("--drop-fraction", type=float, default=0.0)
    ap.add_argument("--offsets-out", help="also write the per-annotation offsets as JSON")
    args = ap.parse_args(argv)
    manifest = read_ground_truth(args.gt)
    dets, offsets = jitter_detections(manifest, args.seed, args.max_offset, drop_fraction=args.drop_fraction)
    write_results(dets, args.out)
    if args.offsets_out:
        with open(args.offsets_out, "w", encoding="utf-8") as fh:
            json.dump({str(k): v for k, v in offsets.items()}, fh, indent=1)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
