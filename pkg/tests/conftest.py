import os

import numpy as np
import pytest
from PIL import Image

from sdrforge.annotator import DatasetManifest, ImageRecord, annotate_frame, write_dataset


def make_fake_dataset(root, n, size=(48, 64), seed=0):
    """``n`` random PNG frames with one drone box each, laid out like a generated dataset."""
    rng = np.random.default_rng(seed)
    os.makedirs(os.path.join(root, "images"), exist_ok=True)
    images, anns = [], []
    h, w = size
    for i in range(n):
        name = f"images/{i:06d}.png"
        Image.fromarray(rng.integers(0, 256, (h, w, 3), dtype=np.uint8)).save(os.path.join(root, name))
        images.append(ImageRecord(i, name, w, h))
        ids = np.zeros(size, np.int32)
        y, x = rng.integers(0, h - 8), rng.integers(0, w - 8)
        ids[y:y + int(rng.integers(3, 8)), x:x + int(rng.integers(3, 8))] = 1
        anns.extend(annotate_frame(i, ids, {1: "drone"}, first_annotation_id=len(anns) + 1))
    manifest = DatasetManifest(images, anns, [{"id": 1, "name": "drone"}], {"master_seed": seed})
    write_dataset(manifest, False, False, root)
    return manifest


@pytest.fixture
def fake_dataset(tmp_path):
    def build(n, **kw):
        root = tmp_path / f"ds{n}"
        make_fake_dataset(str(root), n, **kw)
        return root

    return build


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[n])
