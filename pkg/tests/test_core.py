import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from avloc.core import (AnnotationRecord, BoundingBox, FrameSequence, Homography, OutOfBoundsError,
                        Waveform, apply_homography, boxes_to_mask, seed_rng)


def test_empty_boxes_give_zero_mask():
    assert boxes_to_mask([], 4, 4).sum() == 0
    assert boxes_to_mask([], 4, 4).shape == (4, 4)


def test_full_box_gives_ones():
    assert boxes_to_mask([BoundingBox(0, 0, 4, 4)], 4, 4).all()


def test_overlapping_union_counts_once():
    m = boxes_to_mask([BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 3, 3)], 4, 4)
    assert m.sum() == 7


def test_out_of_bounds_box_rejected():
    with pytest.raises(OutOfBoundsError):
        boxes_to_mask([BoundingBox(2, 0, 5, 2)], 4, 4)


def test_degenerate_box_rejected():
    with pytest.raises(ValueError):
        BoundingBox(3, 0, 3, 2)


boxes_st = st.lists(
    st.tuples(st.integers(0, 7), st.integers(0, 7), st.integers(1, 8), st.integers(1, 8))
    .filter(lambda t: t[0] < t[2] and t[1] < t[3]),
    max_size=5,
)


@settings(max_examples=100, deadline=None)
@given(boxes_st)
def test_mask_matches_inclusion_exclusion(raw):
    boxes = [BoundingBox(*b) for b in raw]
    m = boxes_to_mask(boxes, 8, 8)
    # inclusion-exclusion over all subsets of boxes (intersection of half-open boxes is a box)
    total = 0
    for r in range(1, len(boxes) + 1):
        for sub in itertools.combinations(boxes, r):
            w = min(b.x_max for b in sub) - max(b.x_min for b in sub)
            h = min(b.y_max for b in sub) - max(b.y_min for b in sub)
            total += (-1) ** (r + 1) * max(w, 0) * max(h, 0)
    assert m.sum() == total <= 64


@settings(max_examples=50, deadline=None)
@given(boxes_st, st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(1, 2), st.integers(1, 2)))
def test_mask_monotone_under_added_box(raw, extra):
    boxes = [BoundingBox(*b) for b in raw]
    x, y, w, h = extra
    bigger = boxes + [BoundingBox(x, y, x + w, y + h)]
    assert np.all(boxes_to_mask(bigger, 8, 8) >= boxes_to_mask(boxes, 8, 8))


def test_seed_rng_deterministic_and_golden():
    a, b = seed_rng(0).uniform(size=10), seed_rng(0).uniform(size=10)
    assert np.array_equal(a, b)
    assert seed_rng(0).uniform() != seed_rng(1).uniform()
    np.testing.assert_array_equal(
        seed_rng(42).uniform(size=3), [0.7739560485559633, 0.4388784397520523, 0.8585979199113825])


def test_invalid_homography_is_identity():
    H = Homography(np.array([[2.0, 0, 1], [0, 2, 0], [0, 0, 1]]), valid=False)
    assert np.array_equal(H.matrix, np.eye(3))
    assert H.is_identity()


def test_homography_normalizes_and_is_read_only():
    H = Homography(np.diag([2.0, 2.0, 2.0]) + np.eye(3) * 0)
    assert H.matrix[2, 2] == 1.0
    with pytest.raises(ValueError):
        H.matrix[0, 0] = 5.0
    with pytest.raises(ValueError):
        Homography(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        Homography(np.array([[1.0, 2, 0], [2, 4, 0], [0, 0, 1]]))  # singular


def test_homography_inverse_round_trip():
    rng = seed_rng(3)
    M = np.eye(3) + 0.05 * rng.normal(size=(3, 3))
    H = Homography(M, source_frame=1, target_frame=2)
    pts = rng.uniform(0, 64, (20, 2))
    back = H.inverse().apply(H.apply(pts))
    np.testing.assert_allclose(back, pts, atol=1e-9)
    assert (H.inverse().source_frame, H.inverse().target_frame) == (2, 1)


def test_apply_homography_translation():
    T = np.array([[1.0, 0, 3], [0, 1, -2], [0, 0, 1]])
    np.testing.assert_allclose(apply_homography(T, [[1, 1], [0, 0]]), [[4, -1], [3, -2]])


def test_frame_sequence_validation():
    f = np.zeros((4, 4, 3))
    seq = FrameSequence((f, f), (0, 2), 1, 30.0)
    assert seq.T == 2 and seq.size == (4, 4)
    with pytest.raises(ValueError):
        FrameSequence((f, np.zeros((5, 4, 3))), (0, 2), 0, 30.0)
    with pytest.raises(ValueError):
        FrameSequence((f,), (0,), 1, 30.0)
    with pytest.raises(ValueError):
        FrameSequence((), (), 0, 30.0)


def test_waveform_rejects_bad_input():
    with pytest.raises(ValueError):
        Waveform(np.zeros(10), 0)
    with pytest.raises(ValueError):
        Waveform(np.array([0.0, np.nan]), 100)


def test_annotation_record_round_trip_and_strictness():
    r = AnnotationRecord("v1", 3, "ann0", (BoundingBox(0, 0, 2, 2, "pan"),), True, "sizzle")
    assert AnnotationRecord.from_dict(r.to_dict()) == r
    d = r.to_dict()
    del d["description"]
    with pytest.raises(ValueError, match="missing"):
        AnnotationRecord.from_dict(d)
    with pytest.raises(ValueError, match="unknown"):
        AnnotationRecord.from_dict({**r.to_dict(), "extra": 1})
    with pytest.raises(ValueError, match="boolean"):
        AnnotationRecord.from_dict({**r.to_dict(), "out_of_view_sound": "yes"})
