"""Rasterization against an independent per-pixel oracle, plus workflow rules.

oracle_mask counts, for every pixel center, the polygon-edge crossings
strictly to its right and takes the parity. The library rasterizer fills
spans row by row; the two share no code."""

import random

import numpy as np
import pytest

from cvsannot.annotators import AnnotatorDirectory
from cvsannot.errors import (
    ConflictError,
    PermissionDeniedError,
    ValidationError,
    WorkflowStateError,
)
from cvsannot.sampling import RoiSampler
from cvsannot.segmentation import (
    PolygonAnnotation,
    SegClass,
    SegmentationService,
    SegStatus,
    lint_segmentation,
    mask_to_png_bytes,
    parse_polygon,
    png_bytes_to_mask,
    rasterize,
    validate_polygon,
)


def oracle_mask(polygons, width, height):
    mask = np.zeros((height, width), dtype=np.uint8)
    xc = np.arange(width) + 0.5
    yc = np.arange(height) + 0.5
    for poly in sorted(polygons, key=lambda p: p.draw_order):
        pts = poly.points
        n = len(pts)
        if n < 3:
            continue
        count = np.zeros((height, width), dtype=np.int64)
        for i in range(n):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % n]
            crosses = ((y1 <= yc) & (yc < y2)) | ((y2 <= yc) & (yc < y1))
            if not crosses.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (yc - y1) * (x2 - x1) / (y2 - y1)
            count += crosses[:, None] & (xc[None, :] < xint[:, None])
        value = 0 if poly.is_hole else int(poly.label)
        mask[(count % 2) == 1] = value
    return mask


def square(x0, y0, x1, y1, label=SegClass.GALLBLADDER, order=0, hole=False):
    return PolygonAnnotation(
        label, ((x0, y0), (x1, y0), (x1, y1), (x0, y1)), order, hole
    )


def random_polygon(rng, width, height):
    n = rng.randrange(3, 9)
    pts = tuple(
        (rng.uniform(0, width), rng.uniform(0, height)) for _ in range(n)
    )
    return PolygonAnnotation(
        SegClass(rng.randrange(1, 8)),
        pts,
        draw_order=rng.randrange(0, 4),
        is_hole=rng.random() < 0.2,
    )


# -- rasterization -------------------------------------------------------------


def test_axis_aligned_square_exact():
    mask = rasterize([square(1, 1, 5, 5)], 8, 8)
    expected = np.zeros((8, 8), dtype=np.uint8)
    expected[1:5, 1:5] = SegClass.GALLBLADDER
    assert np.array_equal(mask, expected)


def test_right_triangle_exact():
    tri = PolygonAnnotation(SegClass.CYSTIC_DUCT, ((0, 0), (8, 0), (0, 8)))
    mask = rasterize([tri], 8, 8)
    expected = np.zeros((8, 8), dtype=np.uint8)
    for y in range(7):
        expected[y, : 7 - y] = SegClass.CYSTIC_DUCT
    assert np.array_equal(mask, expected)


def test_matches_oracle_on_random_stacks():
    rng = random.Random(0x5E6)
    for _ in range(60):
        polys = [random_polygon(rng, 32, 32) for _ in range(rng.randrange(1, 5))]
        got = rasterize(polys, 32, 32)
        assert np.array_equal(got, oracle_mask(polys, 32, 32))


def test_draw_order_decides_overlap():
    a = square(0, 0, 6, 6, SegClass.GALLBLADDER, order=0)
    b = square(3, 3, 9, 9, SegClass.CYSTIC_PLATE, order=1)
    mask = rasterize([b, a], 10, 10)  # input order must not matter here
    assert mask[4, 4] == SegClass.CYSTIC_PLATE
    assert mask[1, 1] == SegClass.GALLBLADDER
    flipped = rasterize(
        [square(0, 0, 6, 6, SegClass.GALLBLADDER, order=2), b], 10, 10
    )
    assert flipped[4, 4] == SegClass.GALLBLADDER


def test_equal_draw_order_keeps_list_order():
    a = square(0, 0, 6, 6, SegClass.GALLBLADDER, order=1)
    b = square(0, 0, 6, 6, SegClass.CYSTIC_ARTERY, order=1)
    assert rasterize([a, b], 8, 8)[2, 2] == SegClass.CYSTIC_ARTERY
    assert rasterize([b, a], 8, 8)[2, 2] == SegClass.GALLBLADDER


def test_hole_paints_background():
    ring = square(0, 0, 8, 8, SegClass.GALLBLADDER, order=0)
    hole = square(2, 2, 6, 6, SegClass.GALLBLADDER, order=1, hole=True)
    mask = rasterize([ring, hole], 8, 8)
    assert mask[1, 1] == SegClass.GALLBLADDER
    assert mask[4, 4] == SegClass.BACKGROUND


def test_degenerate_polygons_paint_nothing():
    collinear = PolygonAnnotation(SegClass.GALLBLADDER, ((1, 1), (3, 3), (5, 5)))
    point = PolygonAnnotation(SegClass.GALLBLADDER, ((2, 2), (2, 2), (2, 2)))
    assert rasterize([collinear], 8, 8).sum() == 0
    assert rasterize([point], 8, 8).sum() == 0
    assert np.array_equal(
        rasterize([collinear], 8, 8), oracle_mask([collinear], 8, 8)
    )


def test_empty_stack_is_all_background():
    assert rasterize([], 16, 16).sum() == 0


def test_mask_histogram_accounts_for_every_pixel():
    rng = random.Random(11)
    polys = [random_polygon(rng, 24, 24) for _ in range(4)]
    mask = rasterize(polys, 24, 24)
    hist = np.bincount(mask.ravel(), minlength=8)
    assert hist.sum() == 24 * 24
    assert mask.max() <= 7


def test_mask_png_roundtrip():
    rng = random.Random(3)
    polys = [random_polygon(rng, 20, 14) for _ in range(3)]
    mask = rasterize(polys, 20, 14)
    data = mask_to_png_bytes(mask)
    assert np.array_equal(png_bytes_to_mask(data), mask)
    assert mask_to_png_bytes(mask) == data  # encoding is deterministic


# -- validation ----------------------------------------------------------------


def test_validate_rejects_background_label():
    with pytest.raises(ValidationError):
        validate_polygon(square(0, 0, 4, 4, SegClass.BACKGROUND), 8, 8)


def test_validate_rejects_thin_and_tiny_shapes():
    with pytest.raises(ValidationError):
        validate_polygon(
            PolygonAnnotation(SegClass.GALLBLADDER, ((0, 0), (4, 4))), 8, 8
        )
    with pytest.raises(ValidationError):
        validate_polygon(
            PolygonAnnotation(SegClass.GALLBLADDER, ((0, 0), (2, 2), (4, 4))), 8, 8
        )


def test_validate_rejects_out_of_bounds_vertices():
    with pytest.raises(ValidationError):
        validate_polygon(square(-1, 0, 4, 4), 8, 8)
    with pytest.raises(ValidationError):
        validate_polygon(square(0, 0, 9, 4), 8, 8)
    validate_polygon(square(0, 0, 8, 8), 8, 8)  # corners on the boundary are fine


def test_parse_polygon_accepts_names_and_indices():
    by_name = parse_polygon(
        {"label": "cystic_duct", "points": [[0, 0], [4, 0], [0, 4]]}
    )
    by_index = parse_polygon({"label": 2, "points": [[0, 0], [4, 0], [0, 4]]})
    assert by_name.label is SegClass.CYSTIC_DUCT
    assert by_name == by_index


def test_parse_polygon_rejects_bad_input():
    good_pts = [[0, 0], [4, 0], [0, 4]]
    for doc in (
        {"label": "liver", "points": good_pts},
        {"label": 8, "points": good_pts},
        {"label": 1, "points": [[0, 0], [float("nan"), 1], [2, 2]]},
        {"label": 1, "points": "nope"},
        {"label": 1, "points": [[0, 0, 0], [1, 1], [2, 2]]},
        {"label": 1, "points": good_pts, "draw_order": 1.5},
        {"label": 1, "points": good_pts, "is_hole": "yes"},
    ):
        with pytest.raises(ValidationError):
            parse_polygon(doc)


# -- workflow ------------------------------------------------------------------


@pytest.fixture
def seg_setup(store, registry, sample_video):
    sampler = RoiSampler(store, registry)
    directory = AnnotatorDirectory(store)
    directory.register("alice", "Alice", ["segmenter"])
    directory.register("bob", "Bob", ["segmenter", "reviewer"])
    directory.register("carol", "Carol", ["reviewer"])
    directory.register("rater", "Rater", ["cvs_rater"])
    sampler.set_roi(sample_video.video_id, 120_000, 480_000, 240_000)
    sampler.sample_keyframes(sample_video.video_id, 30_000)
    sampler.materialize_plan(sample_video.video_id)
    service = SegmentationService(store, directory, sampler)
    return service, sample_video.video_id


SHAPES = [{"label": 1, "points": [[2, 2], [10, 2], [10, 10], [2, 10]]}]


def frame(vid, ts=240_000):
    return f"{vid}-{ts:09d}"


def test_submit_and_render(seg_setup):
    service, vid = seg_setup
    record = service.submit_segmentation(frame(vid), "alice", SHAPES)
    assert record.status is SegStatus.SUBMITTED
    assert record.record_id == f"seg-{frame(vid)}"
    mask = service.render_mask(frame(vid))
    assert mask.shape == (24, 32)  # frame dims from the decoded image
    assert mask[5, 5] == SegClass.GALLBLADDER


def test_submit_requires_segmenter_role(seg_setup):
    service, vid = seg_setup
    with pytest.raises(PermissionDeniedError):
        service.submit_segmentation(frame(vid), "carol", SHAPES)


def test_submit_rejects_auto_frames_and_unplanned(seg_setup):
    service, vid = seg_setup
    with pytest.raises(ValidationError):
        service.submit_segmentation(f"{vid}-000120000", "alice", SHAPES)


def test_submit_needs_materialized_frame(store, registry, tmp_path):
    from conftest import make_frame_dir

    d = make_frame_dir(tmp_path / "frames", "nomat", [0, 30_000], salt=5)
    video = registry.register_video(str(d), duration_ms=60_000, fps=25.0)
    sampler = RoiSampler(store, registry)
    directory = AnnotatorDirectory(store)
    directory.register("alice", "Alice", ["segmenter"])
    sampler.set_roi(video.video_id, 0, 60_000)
    sampler.sample_keyframes(video.video_id, 30_000)
    service = SegmentationService(store, directory, sampler)
    with pytest.raises(WorkflowStateError):
        service.submit_segmentation(f"{video.video_id}-000000000", "alice", SHAPES)


def test_second_author_conflicts(seg_setup):
    service, vid = seg_setup
    service.submit_segmentation(frame(vid), "alice", SHAPES)
    with pytest.raises(ConflictError):
        service.submit_segmentation(frame(vid), "bob", SHAPES)


def test_author_can_revise_before_review(seg_setup):
    service, vid = seg_setup
    first = service.submit_segmentation(frame(vid), "alice", SHAPES)
    revised = service.submit_segmentation(
        frame(vid), "alice", SHAPES + [
            {"label": 6, "points": [[12, 12], [20, 12], [16, 20]], "draw_order": 1}
        ],
    )
    assert revised.version == first.version + 1
    assert len(revised.polygons) == 2


def test_review_approval_records_reviewer(seg_setup):
    service, vid = seg_setup
    service.submit_segmentation(frame(vid), "alice", SHAPES)
    record = service.review_segmentation(f"seg-{frame(vid)}", "bob", approve=True)
    assert record.status is SegStatus.APPROVED
    assert record.reviewer_id == "bob"


def test_self_review_denied(seg_setup):
    service, vid = seg_setup
    service.submit_segmentation(frame(vid), "bob", SHAPES)
    with pytest.raises(PermissionDeniedError):
        service.review_segmentation(f"seg-{frame(vid)}", "bob", approve=True)


def test_review_requires_reviewer_role(seg_setup):
    service, vid = seg_setup
    service.submit_segmentation(frame(vid), "bob", SHAPES)
    with pytest.raises(PermissionDeniedError):
        service.review_segmentation(f"seg-{frame(vid)}", "alice", approve=True)


def test_changes_requested_then_resubmit_then_approve(seg_setup):
    service, vid = seg_setup
    service.submit_segmentation(frame(vid), "alice", SHAPES)
    record = service.review_segmentation(
        f"seg-{frame(vid)}", "carol", approve=False, comment="artery missing"
    )
    assert record.status is SegStatus.CHANGES_REQUESTED
    assert record.reviewer_id is None
    assert record.review_comment == "artery missing"
    service.submit_segmentation(frame(vid), "alice", SHAPES)
    final = service.review_segmentation(f"seg-{frame(vid)}", "carol", approve=True)
    assert final.status is SegStatus.APPROVED


def test_approved_record_is_frozen(seg_setup):
    service, vid = seg_setup
    service.submit_segmentation(frame(vid), "alice", SHAPES)
    service.review_segmentation(f"seg-{frame(vid)}", "carol", approve=True)
    with pytest.raises(WorkflowStateError):
        service.submit_segmentation(frame(vid), "alice", SHAPES)
    with pytest.raises(WorkflowStateError):
        service.review_segmentation(f"seg-{frame(vid)}", "bob", approve=False)


def test_claim_review_locks_editing(seg_setup):
    service, vid = seg_setup
    service.submit_segmentation(frame(vid), "alice", SHAPES)
    record = service.claim_review(f"seg-{frame(vid)}", "carol")
    assert record.status is SegStatus.IN_REVIEW
    with pytest.raises(WorkflowStateError):
        service.submit_segmentation(frame(vid), "alice", SHAPES)
    service.review_segmentation(f"seg-{frame(vid)}", "carol", approve=True)


def test_draft_is_not_reviewable(seg_setup):
    service, vid = seg_setup
    service.submit_segmentation(frame(vid), "alice", SHAPES, as_draft=True)
    with pytest.raises(WorkflowStateError):
        service.review_segmentation(f"seg-{frame(vid)}", "carol", approve=True)


def test_invalid_polygon_rejected_at_submit(seg_setup):
    service, vid = seg_setup
    bad = [{"label": 0, "points": [[0, 0], [4, 0], [0, 4]]}]
    with pytest.raises(ValidationError):
        service.submit_segmentation(frame(vid), "alice", bad)
    oob = [{"label": 1, "points": [[0, 0], [40, 0], [0, 4]]}]  # frame is 32 wide
    with pytest.raises(ValidationError):
        service.submit_segmentation(frame(vid), "alice", oob)


# -- lint ------------------------------------------------------------------


def rec_with(classes, frame_id="f1"):
    from cvsannot.segmentation import SegmentationRecord

    return SegmentationRecord(
        frame_id=frame_id,
        video_id="v",
        author_id="a",
        polygons=[
            PolygonAnnotation(c, ((0, 0), (4, 0), (0, 4))) for c in classes
        ],
    )


def test_lint_flags_ignore_class():
    findings = lint_segmentation(rec_with([SegClass.IGNORE]))
    assert [f["code"] for f in findings] == ["ignore-present"]


def test_lint_flags_temporal_gap():
    prev = rec_with([SegClass.GALLBLADDER, SegClass.CYSTIC_DUCT])
    cur = rec_with([SegClass.GALLBLADDER])
    nxt = rec_with([SegClass.GALLBLADDER, SegClass.CYSTIC_DUCT])
    findings = lint_segmentation(cur, prev_record=prev, next_record=nxt)
    assert [f["code"] for f in findings] == ["temporal-gap"]
    assert findings[0]["class"] == "cystic_duct"
    # class absent on only one side is not a gap
    assert lint_segmentation(cur, prev_record=prev, next_record=cur) == []


def test_lint_flags_cleared_triangle_without_region():
    class FakeConsensus:
        c2 = True

    findings = lint_segmentation(rec_with([SegClass.GALLBLADDER]), consensus=FakeConsensus())
    assert [f["code"] for f in findings] == ["c2-without-triangle-class"]
    ok = rec_with([SegClass.HEPATOCYSTIC_TRIANGLE_DISSECTION])
    assert lint_segmentation(ok, consensus=FakeConsensus()) == []


def test_lint_clean_record_has_no_findings():
    assert lint_segmentation(rec_with([SegClass.GALLBLADDER])) == []
