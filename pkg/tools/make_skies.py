"""Regenerate the bundled procedural sky panoramas (src/sdrforge/data/hdri)."""
import argparse
import os

import numpy as np
from PIL import Image

SKIES = [
    # zenith, horizon, ground, sun elevation (deg), cloud cover
    ((0.16, 0.35, 0.75), (0.70, 0.82, 0.95), (0.30, 0.33, 0.22), 55, 0.15),
    ((0.25, 0.45, 0.80), (0.85, 0.88, 0.92), (0.38, 0.36, 0.30), 35, 0.35),
    ((0.45, 0.50, 0.58), (0.72, 0.74, 0.76), (0.28, 0.30, 0.26), 40, 0.80),
    ((0.10, 0.20, 0.50), (0.95, 0.62, 0.35), (0.20, 0.18, 0.15), 6, 0.20),
    ((0.30, 0.55, 0.85), (0.78, 0.88, 0.96), (0.45, 0.45, 0.42), 70, 0.05),
    ((0.55, 0.58, 0.62), (0.80, 0.80, 0.80), (0.33, 0.32, 0.30), 25, 0.95),
    ((0.12, 0.30, 0.65), (0.60, 0.75, 0.90), (0.22, 0.30, 0.18), 15, 0.45),
    ((0.20, 0.40, 0.70), (0.90, 0.80, 0.70), (0.40, 0.35, 0.28), 10, 0.30),
]


def smooth_noise(rng, h, w, octaves=5):
    out = np.zeros((h, w))
    for o in range(octaves):
        gh, gw = 2 + 2**o, 2 * (2 + 2**o)
        grid = rng.random((gh, gw + 1))
        grid[:, -1] = grid[:, 0]
        ys = np.linspace(0, gh - 1, h)
        xs = np.linspace(0, gw, w, endpoint=False)
        y0 = np.floor(ys).astype(int).clip(0, gh - 2)
        x0 = np.floor(xs).astype(int)
        fy = (ys - y0)[:, None]
        fx = (xs - x0)[None, :]
        a = grid[y0][:, x0]
        b = grid[y0][:, x0 + 1]
        c = grid[y0 + 1][:, x0]
        d = grid[y0 + 1][:, x0 + 1]
        out += ((a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy) / 2**o
    return out / out.max()


def make_sky(index, width=512, height=256):
    zenith, horizon, ground, sun_el, cover = SKIES[index]
    rng = np.random.default_rng(1000 + index)
    rows, cols = np.mgrid[0:height, 0:width]
    theta = (rows + 0.5) / height * np.pi
    phi = (cols + 0.5) / width * 2 * np.pi
    elev = np.pi / 2 - theta
    t = np.clip(elev / (np.pi / 2), 0, 1)[..., None] ** 0.6
    img = np.asarray(horizon) * (1 - t) + np.asarray(zenith) * t
    clouds = smooth_noise(rng, height, width)
    cloud_mask = np.clip((clouds - (1 - cover)) * 4, 0, 1)[..., None] * (elev > 0)[..., None]
    img = img * (1 - cloud_mask) + 0.92 * cloud_mask
    sun_az = rng.uniform(0, 2 * np.pi)
    se = np.radians(sun_el)
    sun = np.array([np.cos(se) * np.cos(sun_az), np.cos(se) * np.sin(sun_az), np.sin(se)])
    d = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], -1)
    ang = np.arccos(np.clip(d @ sun, -1, 1))
    img = img + (np.exp(-(ang / 0.05) ** 2) + 0.25 * np.exp(-(ang / 0.3) ** 2))[..., None]
    ground_tex = np.asarray(ground) * (0.8 + 0.4 * smooth_noise(rng, height, width))[..., None]
    below = (elev < 0)[..., None]
    img = np.where(below, ground_tex, img)
    return np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "src", "sdrforge", "data", "hdri"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    for i in range(len(SKIES)):
        Image.fromarray(make_sky(i)).save(os.path.join(args.out, f"sky_{i:02d}.png"))


if __name__ == "__main__":
    main()
