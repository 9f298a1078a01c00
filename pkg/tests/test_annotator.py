import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sdrforge.annotator import (
    DatasetManifest,
    ImageRecord,
    annotate_frame,
    colorize_mask,
    decode_rle,
    encode_rle,
    extract_instances,
    mask_to_bbox,
    rle_area,
    write_dataset,
)
from sdrforge.cocoio import read_ground_truth
from sdrforge.errors import EmptyMask, UnknownId


def test_extract_empty():
    assert extract_instances(np.zeros((4, 5), np.int32), {}) == []


def test_extract_partition():
    ids = np.zeros((6, 6), np.int32)
    ids[:3] = 1
    ids[4:, 2:] = 7
    out = extract_instances(ids, {1: "drone", 7: "bird"})
    assert [i for i, _ in out] == [1, 7]
    assert not (out[0][1] & out[1][1]).any()


def test_extract_unknown_id():
    ids = np.zeros((3, 3), np.int32)
    ids[1, 1] = 9
    with pytest.raises(UnknownId):
        extract_instances(ids, {1: "drone"})


def test_bbox_examples():
    m = np.zeros((12, 12), bool)
    m[4, 3] = m[9, 5] = True
    assert mask_to_bbox(m) == (3, 4, 3, 6)
    m = np.zeros((3, 3), bool)
    m[0, 0] = True
    assert mask_to_bbox(m) == (0, 0, 1, 1)
    with pytest.raises(EmptyMask):
        mask_to_bbox(np.zeros((3, 3), bool))


def test_rle_examples():
    m = np.ones((2, 2), bool)
    m[0, 0] = False
    assert encode_rle(m) == [1, 3]
    assert encode_rle(np.zeros((3, 3), bool)) == [9]
    assert encode_rle(np.ones((2, 3), bool)) == [0, 6]


def test_rle_is_column_major():
    m = np.zeros((2, 3), bool)
    m[0, 1] = True  # column-major position 2
    assert encode_rle(m) == [2, 1, 3]


def test_rle_round_trip_1000_masks():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        h, w = rng.integers(1, 40, 2)
        m = rng.uniform(size=(h, w)) < rng.uniform()
        counts = encode_rle(m)
        assert sum(counts) == h * w
        assert rle_area(counts) == m.sum()
        assert np.array_equal(decode_rle(counts, (h, w)), m)


@settings(max_examples=300, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 25), st.integers(1, 25))))
def test_rle_round_trip_property(m):
    counts = encode_rle(m)
    assert all(c > 0 for c in counts[1:])
    assert np.array_equal(decode_rle(counts, m.shape), m)


def test_colorize():
    ids = np.zeros((4, 4), np.int32)
    assert not colorize_mask(ids, {}).any()
    ids[0, 0] = 1
    ids[3, 3] = 2
    ids[2, 0] = 3
    img = colorize_mask(ids, {1: "drone", 2: "bird", 3: "distractor"})
    assert tuple(img[0, 0]) == (255, 255, 255)
    assert tuple(img[3, 3]) == (0, 0, 255)
    assert tuple(img[2, 0]) == (0, 255, 0)
    assert not img[1].any()


@settings(max_examples=100, deadline=None)
@given(arrays(np.int32, st.tuples(st.integers(1, 30), st.integers(1, 30)), elements=st.integers(0, 4)))
def test_annotation_invariants(ids):
    anns = annotate_frame(1, ids, {1: "drone", 2: "bird", 3: "drone", 4: "distractor"}, min_pixels=1)
    union = np.zeros(ids.shape, bool)
    for a in anns:
        m = a.decode()
        assert mask_to_bbox(m) == tuple(int(v) for v in a.bbox)
        assert a.area == m.sum() <= a.bbox[2] * a.bbox[3]
        assert not (union & m).any()
        union |= m
    assert np.array_equal(union, ids > 0)


def test_min_pixels_drops_tiny_instances():
    ids = np.zeros((10, 10), np.int32)
    ids[0, 0] = 1
    ids[5:7, 5:7] = 2
    anns = annotate_frame(3, ids, {1: "drone", 2: "drone"}, min_pixels=3, first_annotation_id=10)
    assert [(a.annotation_id, a.area) for a in anns] == [(10, 4.0)]
    # still present in the mask image
    assert colorize_mask(ids, {1: "drone", 2: "drone"})[0, 0].all()


def _manifest():
    ids = np.zeros((8, 10), np.int32)
    ids[1:3, 1:4] = 1
    ids[5:8, 6:9] = 2
    anns = annotate_frame(1, ids, {1: "drone", 2: "bird"})
    cats = [{"id": 1, "name": "drone"}, {"id": 2, "name": "bird"}]
    return DatasetManifest([ImageRecord(1, "images/000001.png", 10, 8)], anns, cats, {"master_seed": 0})


def test_write_dataset_bird_filtering(tmp_path):
    m = _manifest()
    dropped = read_ground_truth(write_dataset(m, False, False, tmp_path / "a"))
    assert {a.category for a in dropped.annotations} == {"drone"}
    assert [c["name"] for c in dropped.categories] == ["drone"]
    kept = read_ground_truth(write_dataset(m, True, False, tmp_path / "b"))
    assert {a.category for a in kept.annotations} == {"drone", "bird"}


def test_write_dataset_round_trip_and_bytes(tmp_path):
    m = _manifest()
    p1 = write_dataset(m, True, True, tmp_path / "a")
    back = read_ground_truth(p1)
    assert back == m
    p2 = write_dataset(back, True, True, tmp_path / "b")
    assert open(p1, "rb").read() == open(p2, "rb").read()
