"""COCO-style box detection metrics (AP/AR family) written from scratch."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import DegenerateBox, UnknownCategory, UnknownImageId

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
RECALL_THRESHOLDS = np.arange(101) / 100.0  # correctly rounded i/100
MAX_DETS = 100
SMALL_AREA = 32**2
LARGE_AREA = 96**2
AREA_RANGES = {
    "all": (0.0, math.inf),
    "small": (0.0, SMALL_AREA),
    "medium": (SMALL_AREA, LARGE_AREA),
    "large": (LARGE_AREA, math.inf),
}
UNDEFINED = "-"


@dataclass(frozen=True)
class Detection:
    image_id: int
    category_id: int
    bbox: tuple
    score: float

    def __post_init__(self):
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))
        object.__setattr__(self, "score", float(self.score))


@dataclass(frozen=True)
class EvalResult:
    """One row of the results table; ``None`` marks a regime with no ground truth."""

    ap: Optional[float] = None
    ap50: Optional[float] = None
    ap75: Optional[float] = None
    ap_s: Optional[float] = None
    ap_m: Optional[float] = None
    ap_l: Optional[float] = None
    ar: Optional[float] = None
    ar_s: Optional[float] = None
    ar_m: Optional[float] = None
    ar_l: Optional[float] = None

    @classmethod
    def metric_names(cls):
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalResult":
        unknown = set(d) - set(cls.metric_names())
        if unknown:
            raise ValueError(f"unknown metric field(s): {sorted(unknown)}")
        return cls(**{k: (None if v is None else float(v)) for k, v in d.items()})


TABLE_HEADERS = ("AP", "AP50", "AP75", "AP_S", "AP_M", "AP_L", "AR", "AR_S", "AR_M", "AR_L")


def format_row(result: EvalResult, label: str = "") -> str:
    cells = [UNDEFINED if v is None else f"{v:.3f}" for v in result.to_dict().values()]
    head = f"{label:<16}" if label else ""
    return head + " ".join(f"{c:>6}" for c in cells)


def format_header(label: str = "") -> str:
    head = f"{label:<16}" if label else ""
    return head + " ".join(f"{h:>6}" for h in TABLE_HEADERS)


def iou(box_a, box_b) -> float:
    ax, ay, aw, ah = box_a
    bx, by, bw, bh = box_b
    if aw <= 0 or ah <= 0 or bw <= 0 or bh <= 0:
        raise DegenerateBox(f"boxes need positive extent: {box_a}, {box_b}")
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def iou_matrix(dets: np.ndarray, gts: np.ndarray, crowd=None) -> np.ndarray:
    """Pairwise IoU of xywh boxes; crowd ground truths use intersection over detection area."""
    if len(dets) == 0 or len(gts) == 0:
        return np.zeros((len(dets), len(gts)))
    d = np.asarray(dets, dtype=np.float64)[:, None, :]
    g = np.asarray(gts, dtype=np.float64)[None, :, :]
    iw = np.minimum(d[..., 0] + d[..., 2], g[..., 0] + g[..., 2]) - np.maximum(d[..., 0], g[..., 0])
    ih = np.minimum(d[..., 1] + d[..., 3], g[..., 1] + g[..., 3]) - np.maximum(d[..., 1], g[..., 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    da = d[..., 2] * d[..., 3]
    union = da + g[..., 2] * g[..., 3] - inter
    if crowd is not None:
        union = np.where(np.asarray(crowd, dtype=bool)[None, :], da, union)
    return inter / union


def area_regime(area: float) -> str:
    if area < SMALL_AREA:
        return "small"
    if area < LARGE_AREA:
        return "medium"
    return "large"


def _in_range(area, rng) -> bool:
    lo, hi = rng
    return lo <= area < hi


def _greedy(ious: np.ndarray, gt_ignore, gt_crowd, threshold: float):
    """Match score-sorted detections to ground truths (ground truths pre-sorted, ignored last).

    Returns the matched ground-truth column per detection (-1 if none).
    """
    n_det, n_gt = ious.shape
    taken = np.zeros(n_gt, dtype=bool)
    match = np.full(n_det, -1, dtype=np.int64)
    for d in range(n_det):
        best, best_iou = -1, -1.0
        for g in range(n_gt):
            if taken[g] and not gt_crowd[g]:
                continue
            if best > -1 and not gt_ignore[best] and gt_ignore[g]:
                break
            v = ious[d, g]
            if v < threshold:
                continue
            if best > -1 and v <= best_iou:
                continue
            best, best_iou = g, v
        if best > -1:
            match[d] = best
            taken[best] = True
    return match


def match_detections(detections, ground_truths, iou_threshold: float = 0.5):
    """Greedy matching for one image and one category.

    ``detections`` are ``(bbox, score)`` pairs or :class:`Detection`;
    ``ground_truths`` are xywh boxes.  Returns ``(is_tp, gt_matched)``,
    with ``is_tp`` in the caller's detection order.
    """
    boxes, scores = [], []
    for d in detections:
        if isinstance(d, Detection):
            boxes.append(d.bbox)
            scores.append(d.score)
        else:
            boxes.append(d[0])
            scores.append(d[1])
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    gts = np.asarray(list(ground_truths), dtype=np.float64).reshape(-1, 4)
    ious = iou_matrix(np.asarray(boxes, dtype=np.float64).reshape(-1, 4)[order], gts)
    no = np.zeros(len(gts), dtype=bool)
    match = _greedy(ious, no, no, iou_threshold)
    is_tp = np.zeros(len(boxes), dtype=bool)
    is_tp[order] = match >= 0
    gt_matched = np.zeros(len(gts), dtype=bool)
    gt_matched[match[match >= 0]] = True
    return is_tp.tolist(), gt_matched.tolist()


def average_precision(tp_sequence, n_gt: int) -> Optional[float]:
    """101-point interpolated AP of a score-sorted TP/FP sequence; ``None`` if ``n_gt`` is 0."""
    if n_gt == 0:
        return None
    tp = np.asarray(tp_sequence, dtype=bool)
    return float(_ap_from_flags(tp, ~tp, n_gt)[0])


def _ap_from_flags(tps: np.ndarray, fps: np.ndarray, n_gt: int):
    """Exact ``(AP, recall)`` as fractions.

    Precision and recall are ratios of integer counts, so the envelope and
    the 101-point mean are accumulated exactly and rounded once by the
    caller; results do not depend on summation order.
    """
    if len(tps) == 0:
        return Fraction(0), Fraction(0)
    tp = np.cumsum(tps, dtype=np.int64)
    fp = np.cumsum(fps, dtype=np.int64)
    denom = tp + fp
    # floats only locate the envelope; distinct count ratios never collide
    pr = np.divide(tp, denom, out=np.zeros(len(tp)), where=denom > 0)
    rc = tp / n_gt
    idx = np.searchsorted(rc, RECALL_THRESHOLDS, side="left")
    total = Fraction(0)
    for i, reps in zip(*np.unique(idx[idx < len(pr)], return_counts=True)):
        j = i + int(np.argmax(pr[i:]))
        if denom[j]:
            total += reps * Fraction(int(tp[j]), int(denom[j]))
    return total / len(RECALL_THRESHOLDS), Fraction(int(tp[-1]), n_gt)


def _evaluate_image(dets, gts, area_rng, thresholds, max_dets):
    """Per-threshold matches for one image/category/area range (COCO ignore rules)."""
    g_area = np.array([g[1] for g in gts], dtype=np.float64)
    g_crowd = np.array([g[2] for g in gts], dtype=bool)
    g_ignore = g_crowd | np.array([not _in_range(a, area_rng) for a in g_area], dtype=bool)
    g_order = np.argsort(g_ignore, kind="stable")
    g_boxes = np.array([gts[i][0] for i in g_order], dtype=np.float64).reshape(-1, 4)
    g_ignore = g_ignore[g_order]
    g_crowd = g_crowd[g_order]

    scores = np.array([d.score for d in dets], dtype=np.float64)
    d_order = np.argsort(-scores, kind="stable")[:max_dets]
    d_boxes = np.array([dets[i].bbox for i in d_order], dtype=np.float64).reshape(-1, 4)
    d_scores = scores[d_order]
    d_out = np.array([not _in_range(b[2] * b[3], area_rng) for b in d_boxes], dtype=bool)
    ious = iou_matrix(d_boxes, g_boxes, g_crowd)

    matched = np.zeros((len(thresholds), len(d_boxes)), dtype=bool)
    d_ignore = np.zeros((len(thresholds), len(d_boxes)), dtype=bool)
    for t, thr in enumerate(thresholds):
        m = _greedy(ious, g_ignore, g_crowd, thr)
        hit = m >= 0
        matched[t] = hit
        d_ignore[t] = np.where(hit, g_ignore[np.maximum(m, 0)], d_out) if len(g_boxes) else d_out
    return d_scores, matched, d_ignore, int((~g_ignore).sum())


def _index(manifest, detections, category_ids):
    image_ids = {im.image_id for im in manifest.images}
    known_cats = {c["id"] for c in manifest.categories}
    bad = {d.image_id for d in detections if d.image_id not in image_ids}
    if bad:
        raise UnknownImageId(bad)
    bad_cats = {d.category_id for d in detections if d.category_id not in known_cats}
    if bad_cats:
        raise UnknownCategory(f"unknown category_id(s): {sorted(bad_cats)}")
    gts, dts = {}, {}
    for a in manifest.annotations:
        if a.category_id in category_ids:
            gts.setdefault((a.image_id, a.category_id), []).append((a.bbox, a.area, a.iscrowd))
    for d in detections:
        if d.category_id in category_ids:
            dts.setdefault((d.image_id, d.category_id), []).append(d)
    return sorted(image_ids), gts, dts


def default_categories(manifest) -> list:
    drone = [c["id"] for c in manifest.categories if c["name"] == "drone"]
    return drone or sorted(c["id"] for c in manifest.categories)


def evaluate(manifest, detections, category_ids=None, iou_thresholds=IOU_THRESHOLDS,
             max_dets: int = MAX_DETS) -> EvalResult:
    """Score detections against a ground-truth manifest.

    Only the ``drone`` category is scored unless ``category_ids`` says
    otherwise.  Ground-truth area is the mask pixel count where a mask is
    present and the box area otherwise; detections use box area.
    """
    detections = list(detections)
    if category_ids is None:
        category_ids = default_categories(manifest)
    unknown = set(category_ids) - {c["id"] for c in manifest.categories}
    if unknown:
        raise UnknownCategory(f"unknown category_id(s): {sorted(unknown)}")
    images, gts, dts = _index(manifest, detections, set(category_ids))
    thresholds = tuple(iou_thresholds)
    table = {}
    for area_name, rng in AREA_RANGES.items():
        ap = [[None] * len(category_ids) for _ in thresholds]
        ar = [[None] * len(category_ids) for _ in thresholds]
        for k, cat in enumerate(category_ids):
            scores, matched, ignored, n_gt = [], [], [], 0
            for img in images:
                g = gts.get((img, cat), [])
                d = dts.get((img, cat), [])
                if not g and not d:
                    continue
                s, m, ig, n = _evaluate_image(d, g, rng, thresholds, max_dets)
                scores.append(s)
                matched.append(m)
                ignored.append(ig)
                n_gt += n
            if n_gt == 0:
                continue
            s = np.concatenate(scores) if scores else np.zeros(0)
            order = np.argsort(-s, kind="stable")
            m = np.concatenate(matched, axis=1)[:, order] if scores else np.zeros((len(thresholds), 0), bool)
            ig = np.concatenate(ignored, axis=1)[:, order] if scores else np.zeros((len(thresholds), 0), bool)
            for t in range(len(thresholds)):
                tps = m[t] & ~ig[t]
                fps = ~m[t] & ~ig[t]
                ap[t][k], ar[t][k] = _ap_from_flags(tps, fps, n_gt)
        table[area_name] = (ap, ar)

    def mean(rows):
        # exact mean of the defined cells, rounded once
        cells = [v for row in rows for v in row if v is not None]
        return float(sum(cells, Fraction(0)) / len(cells)) if cells else None

    def at(iou_value):
        if iou_value not in thresholds:
            return None
        return mean([table["all"][0][thresholds.index(iou_value)]])

    return EvalResult(
        ap=mean(table["all"][0]),
        ap50=at(0.5),
        ap75=at(0.75),
        ap_s=mean(table["small"][0]),
        ap_m=mean(table["medium"][0]),
        ap_l=mean(table["large"][0]),
        ar=mean(table["all"][1]),
        ar_s=mean(table["small"][1]),
        ar_m=mean(table["medium"][1]),
        ar_l=mean(table["large"][1]),
    )
