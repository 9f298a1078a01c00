"""Independent reference for the detection metrics, in exact rational arithmetic.

Nothing here imports from ``sdrforge.metrics``.  Matching is re-derived from
its definition by enumerating candidates explicitly; AP takes the envelope
maximum over every PR point at each recall threshold instead of a running
maximum plus a search.
"""
from fractions import Fraction as F

IOU_T = [F(50 + 5 * i, 100) for i in range(10)]
RECALLS = [F(i, 100) for i in range(101)]
RANGES = {
    "all": (F(0), None),
    "small": (F(0), F(1024)),
    "medium": (F(1024), F(9216)),
    "large": (F(9216), None),
}


def _q(v):
    return F(v).limit_denominator(10**9) if isinstance(v, float) else F(v)


def box_iou(d, g, crowd=False):
    dx, dy, dw, dh = map(_q, d)
    gx, gy, gw, gh = map(_q, g)
    iw = min(dx + dw, gx + gw) - max(dx, gx)
    ih = min(dy + dh, gy + gh) - max(dy, gy)
    if iw <= 0 or ih <= 0:
        return F(0)
    inter = iw * ih
    union = dw * dh if crowd else dw * dh + gw * gh - inter
    return inter / union


def in_range(area, rng):
    lo, hi = rng
    return area >= lo and (hi is None or area < hi)


def match_image(dets, gts, rng, thr):
    """``dets``: list of (bbox, score) in input order.  ``gts``: list of (bbox, area, crowd).

    Returns per-detection (matched, ignored) in score order, plus the
    number of non-ignored ground truths.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i][1], i))[:100]
    g_ign = [bool(c) or not in_range(_q(a), rng) for _, a, c in gts]
    taken = [False] * len(gts)
    out = []
    for i in order:
        box = dets[i][0]
        best = None
        # candidates grouped: non-ignored first, then ignored; inside a group,
        # highest IoU then lowest index
        for group in (False, True):
            cands = []
            for j, (gb, _, crowd) in enumerate(gts):
                if g_ign[j] != group:
                    continue
                if taken[j] and not crowd:
                    continue
                v = box_iou(box, gb, crowd)
                if v >= thr:
                    cands.append((-v, j))
            if cands:
                best = min(cands)[1]
                break
        if best is not None:
            taken[best] = True
            out.append((dets[i][1], True, g_ign[best]))
        else:
            bx = box
            out.append((dets[i][1], False, not in_range(_q(bx[2]) * _q(bx[3]), rng)))
    return out, sum(1 for v in g_ign if not v)


def ap_from_sequence(flags, n_gt):
    """101-point AP of a score-ordered list of True (TP) / False (FP)."""
    if n_gt == 0:
        return None
    points = []
    tp = fp = 0
    for f in flags:
        tp += f
        fp += not f
        points.append((F(tp, n_gt), F(tp, tp + fp)))
    total = F(0)
    for r in RECALLS:
        ps = [p for rc, p in points if rc >= r]
        total += max(ps) if ps else 0
    return total / len(RECALLS)


def recall_of(flags, n_gt):
    return F(sum(flags), n_gt)


def evaluate(images, gts, dets, category_id=1):
    """Reference evaluation for one category.

    ``images``: list of image ids.  ``gts``: {image_id: [(bbox, area, crowd)]}.
    ``dets``: list of (image_id, bbox, score) in file order.
    Returns a dict with the ten metric names; ``None`` where undefined.
    """
    per_image = {}
    for k, (img, box, score) in enumerate(dets):
        per_image.setdefault(img, []).append((box, score))
    result = {}
    for name, rng in RANGES.items():
        aps, ars = [], []
        for thr in IOU_T:
            merged, n_gt = [], 0
            for rank, img in enumerate(sorted(images)):
                rows, n = match_image(per_image.get(img, []), gts.get(img, []), rng, thr)
                n_gt += n
                merged.extend((-s, rank, pos, m, ig) for pos, (s, m, ig) in enumerate(rows))
            merged.sort()
            flags = [m for _, _, _, m, ig in merged if not ig]
            if n_gt == 0:
                aps.append(None)
                ars.append(None)
            else:
                aps.append(ap_from_sequence(flags, n_gt))
                ars.append(recall_of(flags, n_gt))
        key = {"all": "", "small": "_s", "medium": "_m", "large": "_l"}[name]
        defined = [a for a in aps if a is not None]
        result["ap" + key] = float(sum(defined) / len(defined)) if defined else None
        defined = [a for a in ars if a is not None]
        result["ar" + key] = float(sum(defined) / len(defined)) if defined else None
        if name == "all":
            result["ap50"] = None if aps[0] is None else float(aps[0])
            result["ap75"] = None if aps[5] is None else float(aps[5])
    return result


def random_instance(rng, max_images=4, max_boxes=5, crowd_rate=0.1):
    """A small random GT/detection problem on a half-pixel grid.

    ``rng`` is a numpy Generator.  Returns ``(coco_gt, coco_results, images,
    gts, dets)``: the first two are COCO documents for the artifact, the
    rest are inputs for :func:`evaluate`.
    """
    n_img = int(rng.integers(1, max_images + 1))
    images = list(range(1, n_img + 1))
    doc = {"images": [{"id": i, "file_name": f"{i}.png", "width": 640, "height": 480} for i in images],
           "annotations": [], "categories": [{"id": 1, "name": "drone"}]}
    results, gts, dets = [], {}, []
    ann_id = 1

    def box(w_hi):
        w = float(rng.integers(4, w_hi)) / 2
        h = float(rng.integers(4, w_hi)) / 2
        return [float(rng.integers(0, 800)) / 2, float(rng.integers(0, 600)) / 2, w, h]

    for img in images:
        for _ in range(int(rng.integers(0, max_boxes + 1))):
            w_hi = int(rng.choice([60, 180, 300]))
            b = box(w_hi)
            crowd = int(rng.uniform() < crowd_rate)
            doc["annotations"].append({"id": ann_id, "image_id": img, "category_id": 1, "bbox": b,
                                       "iscrowd": crowd})
            gts.setdefault(img, []).append((b, b[2] * b[3], crowd))
            ann_id += 1
        for _ in range(int(rng.integers(0, max_boxes + 1))):
            src = gts.get(img)
            if src and rng.uniform() < 0.7:
                g = src[int(rng.integers(len(src)))][0]
                b = [g[0] + float(rng.integers(-6, 7)) / 2, g[1] + float(rng.integers(-6, 7)) / 2,
                     max(0.5, g[2] + float(rng.integers(-6, 7)) / 2), max(0.5, g[3] + float(rng.integers(-6, 7)) / 2)]
            else:
                b = box(int(rng.choice([60, 180, 300])))
            score = float(rng.integers(1, 11)) / 10
            results.append({"image_id": img, "category_id": 1, "bbox": b, "score": score})
            dets.append((img, b, score))
    return doc, results, images, gts, dets
