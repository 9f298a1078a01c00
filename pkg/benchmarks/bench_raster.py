"""Compare the compiled and numpy triangle-fill kernels.

Times ``fill_triangles`` on the triangle sets of real generated frames and on
a synthetic stress scene, checks that both kernels return identical buffers,
and prints one row per workload::

    python benchmarks/bench_raster.py --frames 40 --repeat 3
"""
import argparse
import time

import numpy as np

from sdrforge.randomizer import GenerationConfig, build_frame
from sdrforge.renderer import BACKEND, _collect, fill_triangles


def frame_workload(n_frames, bound):
    cfg = GenerationConfig(style="generic_distractors", camera_bound_B=bound, master_seed=1)
    out = []
    for i in range(n_frames):
        f = build_frame(cfg.master_seed, i, cfg)
        cam = f.camera
        tris = _collect(f, cam)[0]
        depth = -tris[:, :, 2]
        fpx = cam.focal_px
        sx = cam.image_width / 2 + fpx * tris[:, :, 0] / depth
        sy = cam.image_height / 2 - fpx * tris[:, :, 1] / depth
        out.append((sx, sy, 1.0 / depth, cam.image_width, cam.image_height))
    return out


def stress_workload(n_tris, seed=0):
    rng = np.random.default_rng(seed)
    centre = rng.uniform((0, 0), (640, 480), (n_tris, 1, 2))
    pts = centre + rng.normal(0, 25, (n_tris, 3, 2))
    iz = 1.0 / rng.uniform(5, 50, (n_tris, 3))
    return [(pts[..., 0], pts[..., 1], iz, 640, 480)]


def time_backend(work, backend, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for args in work:
            fill_triangles(*args, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=40)
    ap.add_argument("--stress", type=int, default=20000, help="triangles in the synthetic scene")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    workloads = {
        "frames B=20": frame_workload(args.frames, 20.0),
        "frames B=80": frame_workload(args.frames, 80.0),
        f"stress {args.stress} tris": stress_workload(args.stress),
    }
    if BACKEND != "cython":
        print("compiled kernel not available; timing the numpy kernel only")
    print(f"{'workload':<22}{'tris':>9}{'numpy s':>10}{'cython s':>10}{'speedup':>9}  identical")
    for name, work in workloads.items():
        n = sum(len(w[0]) for w in work)
        t_np = time_backend(work, "numpy", args.repeat)
        if BACKEND == "cython":
            t_c = time_backend(work, "cython", args.repeat)
            same = all(
                all(np.array_equal(a, b) for a, b in zip(fill_triangles(*w, backend="numpy"),
                                                          fill_triangles(*w, backend="cython")))
                for w in work
            )
            print(f"{name:<22}{n:>9}{t_np:>10.3f}{t_c:>10.3f}{t_np / t_c:>8.1f}x  {same}")
        else:
            print(f"{name:<22}{n:>9}{t_np:>10.3f}{'-':>10}{'-':>9}  -")


if __name__ == "__main__":
    main()
