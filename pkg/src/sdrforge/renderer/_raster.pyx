# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled z-buffer triangle fill.

Arithmetic mirrors ``_raster_py`` operation for operation (built with
``-ffp-contract=off``) so both backends agree bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, INFINITY

cnp.import_array()


def fill_triangles(double[:, ::1] sx, double[:, ::1] sy, double[:, ::1] iz,
                   int width, int height):
    cdef Py_ssize_t ntri = sx.shape[0]
    depth_arr = np.full((height, width), np.inf, dtype=np.float64)
    index_arr = np.full((height, width), -1, dtype=np.int32)
    cdef double[:, ::1] depth = depth_arr
    cdef int[:, ::1] index = index_arr
    cdef Py_ssize_t t
    cdef int r, c, r0, r1, c0, c1
    cdef double x0, y0, x1, y1, x2, y2, area, px, py, w0, w1, w2, inv, d
    cdef double z0, z1, z2, lo, hi
    with nogil:
        for t in range(ntri):
            x0 = sx[t, 0]; x1 = sx[t, 1]; x2 = sx[t, 2]
            y0 = sy[t, 0]; y1 = sy[t, 1]; y2 = sy[t, 2]
            z0 = iz[t, 0]; z1 = iz[t, 1]; z2 = iz[t, 2]
            area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
            if area == 0.0:
                continue
            lo = x0
            if x1 < lo: lo = x1
            if x2 < lo: lo = x2
            hi = x0
            if x1 > hi: hi = x1
            if x2 > hi: hi = x2
            if hi - 0.5 < 0 or lo - 0.5 > width - 1:
                continue
            c0 = <int>ceil(lo - 0.5)
            c1 = <int>floor(hi - 0.5)
            if c0 < 0: c0 = 0
            if c1 > width - 1: c1 = width - 1
            lo = y0
            if y1 < lo: lo = y1
            if y2 < lo: lo = y2
            hi = y0
            if y1 > hi: hi = y1
            if y2 > hi: hi = y2
            if hi - 0.5 < 0 or lo - 0.5 > height - 1:
                continue
            r0 = <int>ceil(lo - 0.5)
            r1 = <int>floor(hi - 0.5)
            if r0 < 0: r0 = 0
            if r1 > height - 1: r1 = height - 1
            for r in range(r0, r1 + 1):
                py = r + 0.5
                for c in range(c0, c1 + 1):
                    px = c + 0.5
                    w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
                    w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
                    w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
                    if area > 0:
                        if w0 < 0 or w1 < 0 or w2 < 0:
                            continue
                    else:
                        if w0 > 0 or w1 > 0 or w2 > 0:
                            continue
                    inv = (w0 * z0 + w1 * z1 + w2 * z2) / area
                    if not inv > 0:
                        continue
                    d = 1.0 / inv
                    if d < depth[r, c]:
                        depth[r, c] = d
                        index[r, c] = <int>t
    return depth_arr, index_arr
