"""Pure-numpy z-buffer triangle fill (fallback for the compiled kernel)."""
import math

import numpy as np


def fill_triangles(sx, sy, iz, width, height):
    """Rasterise screen-space triangles into a depth and triangle-index buffer.

    Pixel centres sit at ``(c + 0.5, r + 0.5)``; coverage is inclusive on
    edges; depth is perspective-correct via interpolated inverse depth.  The
    nearest depth wins and earlier triangles win exact ties.
    """
    depth = np.full((height, width), np.inf)
    index = np.full((height, width), -1, dtype=np.int32)
    for t in range(len(sx)):
        x0, x1, x2 = (float(v) for v in sx[t])
        y0, y1, y2 = (float(v) for v in sy[t])
        z0, z1, z2 = (float(v) for v in iz[t])
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        lo, hi = min(x0, x1, x2), max(x0, x1, x2)
        if hi - 0.5 < 0 or lo - 0.5 > width - 1:
            continue
        c0, c1 = max(math.ceil(lo - 0.5), 0), min(math.floor(hi - 0.5), width - 1)
        lo, hi = min(y0, y1, y2), max(y0, y1, y2)
        if hi - 0.5 < 0 or lo - 0.5 > height - 1:
            continue
        r0, r1 = max(math.ceil(lo - 0.5), 0), min(math.floor(hi - 0.5), height - 1)
        if c1 < c0 or r1 < r0:
            continue
        py = (np.arange(r0, r1 + 1, dtype=np.float64) + 0.5)[:, None]
        px = (np.arange(c0, c1 + 1, dtype=np.float64) + 0.5)[None, :]
        w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
        w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
        if area > 0:
            inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        else:
            inside = (w0 <= 0) & (w1 <= 0) & (w2 <= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = (w0 * z0 + w1 * z1 + w2 * z2) / area
            d = 1.0 / inv
        zb = depth[r0:r1 + 1, c0:c1 + 1]
        win = inside & (inv > 0) & (d < zb)
        zb[win] = d[win]
        index[r0:r1 + 1, c0:c1 + 1][win] = t
    return depth, index
