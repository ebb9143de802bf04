"""Polygon segmentation under a fixed eight-class table.

Masks are single-channel index images. Rasterization is pinned to one
convention so re-exports are bit-identical:

  * a pixel (x, y) samples at its center (x + 0.5, y + 0.5)
  * an edge (x1,y1)-(x2,y2) crosses the row line at yc when y1 <= yc < y2
    or y2 <= yc < y1 (half-open, so shared vertices count once)
  * even-odd fill; a span [a, b) covers pixels ceil(a-0.5) .. ceil(b-0.5)-1
  * polygons paint in ascending draw_order (stable for equal orders),
    later paint overwrites earlier
  * a hole paints index 0 regardless of its label

Each frame is segmented by exactly one author and checked by at least one
independent reviewer; nothing merges polygons from different people."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np
from PIL import Image

from .annotators import AnnotatorDirectory, Role
from .errors import (
    ConflictError,
    NotFoundError,
    PermissionDeniedError,
    ValidationError,
    WorkflowStateError,
)
from .sampling import FrameOrigin, RoiSampler
from .store import RecordStore

KIND_SEGMENTATION = "segmentation"

CLASS_TABLE_VERSION = "1"


class SegClass(IntEnum):
    BACKGROUND = 0
    GALLBLADDER = 1
    CYSTIC_DUCT = 2
    CYSTIC_ARTERY = 3
    CYSTIC_PLATE = 4
    HEPATOCYSTIC_TRIANGLE_DISSECTION = 5
    SURGICAL_INSTRUMENT = 6
    IGNORE = 7


CLASS_NAMES = {
    SegClass.BACKGROUND: "background",
    SegClass.GALLBLADDER: "gallbladder",
    SegClass.CYSTIC_DUCT: "cystic_duct",
    SegClass.CYSTIC_ARTERY: "cystic_artery",
    SegClass.CYSTIC_PLATE: "cystic_plate",
    SegClass.HEPATOCYSTIC_TRIANGLE_DISSECTION: "hepatocystic_triangle_dissection",
    SegClass.SURGICAL_INSTRUMENT: "surgical_instrument",
    SegClass.IGNORE: "ignore",
}

NAME_TO_CLASS = {v: k for k, v in CLASS_NAMES.items()}

# display palette for index -> RGB; index 0 stays black
PALETTE = {
    SegClass.BACKGROUND: (0, 0, 0),
    SegClass.GALLBLADDER: (0, 255, 0),
    SegClass.CYSTIC_DUCT: (255, 255, 0),
    SegClass.CYSTIC_ARTERY: (255, 0, 0),
    SegClass.CYSTIC_PLATE: (0, 0, 255),
    SegClass.HEPATOCYSTIC_TRIANGLE_DISSECTION: (255, 0, 255),
    SegClass.SURGICAL_INSTRUMENT: (0, 255, 255),
    SegClass.IGNORE: (255, 255, 255),
}


class SegStatus(str, Enum):
    DRAFT = "draft"
    SUBMITTED = "submitted"
    IN_REVIEW = "in_review"
    APPROVED = "approved"
    CHANGES_REQUESTED = "changes_requested"


_RESUBMITTABLE = {SegStatus.DRAFT, SegStatus.SUBMITTED, SegStatus.CHANGES_REQUESTED}
_REVIEWABLE = {SegStatus.SUBMITTED, SegStatus.IN_REVIEW}


@dataclass(frozen=True)
class PolygonAnnotation:
    label: SegClass
    points: tuple[tuple[float, float], ...]
    draw_order: int = 0
    is_hole: bool = False

    def to_doc(self) -> dict:
        return {
            "label": int(self.label),
            "points": [[float(x), float(y)] for x, y in self.points],
            "draw_order": self.draw_order,
            "is_hole": self.is_hole,
        }


def shoelace_area(points) -> float:
    total = 0.0
    n = len(points)
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return total / 2.0


def parse_polygon(doc: dict) -> PolygonAnnotation:
    """Interchange shape -> polygon. Accepts the class by index or by name."""
    label = doc.get("label")
    if isinstance(label, str):
        if label not in NAME_TO_CLASS:
            raise ValidationError(f"unknown class name {label!r}")
        label = NAME_TO_CLASS[label]
    try:
        label = SegClass(label)
    except ValueError:
        raise ValidationError(f"class index {label!r} outside the class table") from None
    raw_points = doc.get("points")
    if not isinstance(raw_points, list):
        raise ValidationError("points must be a list of [x, y] pairs")
    points = []
    for p in raw_points:
        if not (isinstance(p, (list, tuple)) and len(p) == 2):
            raise ValidationError(f"bad vertex {p!r}")
        x, y = float(p[0]), float(p[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValidationError(f"non-finite vertex {p!r}")
        points.append((x, y))
    draw_order = doc.get("draw_order", 0)
    if not isinstance(draw_order, int) or isinstance(draw_order, bool):
        raise ValidationError("draw_order must be an integer")
    is_hole = doc.get("is_hole", False)
    if not isinstance(is_hole, bool):
        raise ValidationError("is_hole must be a boolean")
    return PolygonAnnotation(label, tuple(points), draw_order, is_hole)


def validate_polygon(poly: PolygonAnnotation, width: int, height: int) -> None:
    if poly.label is SegClass.BACKGROUND:
        raise ValidationError("background is implicit; polygons may not use index 0")
    if len(poly.points) < 3:
        raise ValidationError(f"polygon needs at least 3 vertices, got {len(poly.points)}")
    if shoelace_area(poly.points) == 0.0:
        raise ValidationError("polygon has zero area")
    for x, y in poly.points:
        if not (0.0 <= x <= width and 0.0 <= y <= height):
            raise ValidationError(
                f"vertex ({x}, {y}) outside frame bounds {width}x{height}"
            )


@dataclass
class SegmentationRecord:
    frame_id: str
    video_id: str
    author_id: str
    polygons: list[PolygonAnnotation] = field(default_factory=list)
    status: SegStatus = SegStatus.SUBMITTED
    reviewer_id: str | None = None
    review_comment: str = ""
    class_table_version: str = CLASS_TABLE_VERSION
    version: int = 0

    @property
    def record_id(self) -> str:
        return f"seg-{self.frame_id}"

    def to_doc(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "video_id": self.video_id,
            "author_id": self.author_id,
            "polygons": [p.to_doc() for p in self.polygons],
            "status": self.status.value,
            "reviewer_id": self.reviewer_id,
            "review_comment": self.review_comment,
            "class_table_version": self.class_table_version,
        }

    @classmethod
    def from_record(cls, record) -> "SegmentationRecord":
        d = record.doc
        return cls(
            frame_id=d["frame_id"],
            video_id=d["video_id"],
            author_id=d["author_id"],
            polygons=[parse_polygon(p) for p in d["polygons"]],
            status=SegStatus(d["status"]),
            reviewer_id=d["reviewer_id"],
            review_comment=d.get("review_comment", ""),
            class_table_version=d["class_table_version"],
            version=record.version,
        )


# -- rasterization -------------------------------------------------------------


def _paint(mask: np.ndarray, points, value: int) -> None:
    height, width = mask.shape
    n = len(points)
    if n < 3:
        return
    ys = [p[1] for p in points]
    row_lo = max(0, int(math.floor(min(ys) - 0.5)))
    row_hi = min(height, int(math.ceil(max(ys) + 0.5)))
    for row in range(row_lo, row_hi):
        yc = row + 0.5
        crossings = []
        for i in range(n):
            x1, y1 = points[i]
            x2, y2 = points[(i + 1) % n]
            if (y1 <= yc < y2) or (y2 <= yc < y1):
                crossings.append(x1 + (yc - y1) * (x2 - x1) / (y2 - y1))
        crossings.sort()
        for a, b in zip(crossings[0::2], crossings[1::2]):
            lo = max(0, math.ceil(a - 0.5))
            hi = min(width, math.ceil(b - 0.5))
            if lo < hi:
                mask[row, lo:hi] = value


def rasterize(polygons, width: int, height: int) -> np.ndarray:
    """Index mask for a polygon stack. Degenerate polygons paint nothing;
    this function never raises on shape content."""
    if width <= 0 or height <= 0:
        raise ValidationError("mask dimensions must be positive")
    mask = np.zeros((height, width), dtype=np.uint8)
    for poly in sorted(polygons, key=lambda p: p.draw_order):
        value = 0 if poly.is_hole else int(poly.label)
        _paint(mask, poly.points, value)
    return mask


def mask_to_png_bytes(mask: np.ndarray) -> bytes:
    """Encode as an indexed PNG whose palette is the display palette above."""
    img = Image.fromarray(np.ascontiguousarray(mask, dtype=np.uint8), mode="P")
    flat = [0] * 768
    for cls, (r, g, b) in PALETTE.items():
        flat[cls * 3 : cls * 3 + 3] = [r, g, b]
    img.putpalette(flat)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def png_bytes_to_mask(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data))
    if img.mode != "P":
        raise ValidationError(f"mask must be an indexed PNG, got mode {img.mode}")
    return np.asarray(img, dtype=np.uint8)


# -- workflow ------------------------------------------------------------------


class SegmentationService:
    def __init__(
        self,
        store: RecordStore,
        directory: AnnotatorDirectory,
        sampler: RoiSampler,
    ):
        self.store = store
        self.directory = directory
        self.sampler = sampler

    def _frame_dims(self, frame_id: str) -> tuple[int, int]:
        try:
            image = self.sampler.get_frame_image(frame_id)
        except NotFoundError:
            raise WorkflowStateError(
                f"frame {frame_id} has no materialized image; run materialization first"
            ) from None
        return image.width, image.height

    def submit_segmentation(
        self,
        frame_id: str,
        author_id: str,
        shapes: list[dict] | list[PolygonAnnotation],
        as_draft: bool = False,
    ) -> SegmentationRecord:
        self.directory.require_role(author_id, Role.SEGMENTER)
        ref = self.sampler.find_frame(frame_id)
        if ref.origin is not FrameOrigin.MANUAL_KEYFRAME:
            raise ValidationError(
                f"{frame_id} is an auto-labeled frame; only manual keyframes are segmented"
            )
        width, height = self._frame_dims(frame_id)
        polygons = [
            p if isinstance(p, PolygonAnnotation) else parse_polygon(p) for p in shapes
        ]
        for poly in polygons:
            validate_polygon(poly, width, height)
        record_id = f"seg-{frame_id}"
        existing = self.store.find(KIND_SEGMENTATION, record_id)
        if existing is not None:
            current = SegmentationRecord.from_record(existing)
            if current.author_id != author_id:
                raise ConflictError(
                    f"{frame_id} is already segmented by {current.author_id}; "
                    "each frame has a single author"
                )
            if current.status not in _RESUBMITTABLE:
                raise WorkflowStateError(
                    f"segmentation for {frame_id} is {current.status.value}; "
                    "it can no longer be edited"
                )
        record = SegmentationRecord(
            frame_id=frame_id,
            video_id=ref.video_id,
            author_id=author_id,
            polygons=polygons,
            status=SegStatus.DRAFT if as_draft else SegStatus.SUBMITTED,
        )
        rec = self.store.put(
            KIND_SEGMENTATION,
            record_id,
            record.to_doc(),
            expected_version=None if existing is None else existing.version,
            actor=author_id,
        )
        record.version = rec.version
        return record

    def get_segmentation(self, record_id: str) -> SegmentationRecord:
        if not record_id.startswith("seg-"):
            record_id = f"seg-{record_id}"
        return SegmentationRecord.from_record(self.store.get(KIND_SEGMENTATION, record_id))

    def find_segmentation(self, frame_id: str) -> SegmentationRecord | None:
        rec = self.store.find(KIND_SEGMENTATION, f"seg-{frame_id}")
        return None if rec is None else SegmentationRecord.from_record(rec)

    def claim_review(self, record_id: str, reviewer_id: str) -> SegmentationRecord:
        record = self._reviewable(record_id, reviewer_id)
        if record.status is SegStatus.IN_REVIEW:
            return record
        record.status = SegStatus.IN_REVIEW
        return self._save(record, actor=reviewer_id)

    def review_segmentation(
        self,
        record_id: str,
        reviewer_id: str,
        approve: bool,
        comment: str = "",
    ) -> SegmentationRecord:
        record = self._reviewable(record_id, reviewer_id)
        record.status = SegStatus.APPROVED if approve else SegStatus.CHANGES_REQUESTED
        record.reviewer_id = reviewer_id if approve else None
        record.review_comment = comment
        return self._save(record, actor=reviewer_id)

    def _reviewable(self, record_id: str, reviewer_id: str) -> SegmentationRecord:
        self.directory.require_role(reviewer_id, Role.REVIEWER)
        record = self.get_segmentation(record_id)
        if record.author_id == reviewer_id:
            raise PermissionDeniedError(
                "authors may not review their own segmentation"
            )
        if record.status not in _REVIEWABLE:
            raise WorkflowStateError(
                f"segmentation is {record.status.value}; review needs "
                "submitted or in_review"
            )
        return record

    def _save(self, record: SegmentationRecord, actor: str) -> SegmentationRecord:
        rec = self.store.put(
            KIND_SEGMENTATION,
            record.record_id,
            record.to_doc(),
            expected_version=record.version,
            actor=actor,
        )
        record.version = rec.version
        return record

    def render_mask(self, frame_id: str) -> np.ndarray:
        record = self.get_segmentation(frame_id)
        width, height = self._frame_dims(record.frame_id)
        return rasterize(record.polygons, width, height)


# -- lint ------------------------------------------------------------------


def _classes_present(record: SegmentationRecord) -> set[SegClass]:
    return {p.label for p in record.polygons if not p.is_hole}


def lint_segmentation(
    record: SegmentationRecord,
    prev_record: SegmentationRecord | None = None,
    next_record: SegmentationRecord | None = None,
    consensus=None,
) -> list[dict]:
    """Advisory findings only; nothing here blocks a submission."""
    findings: list[dict] = []
    if any(p.label is SegClass.IGNORE for p in record.polygons):
        findings.append(
            {
                "code": "ignore-present",
                "message": "frame uses the ignore class; confirm the region is "
                "genuinely unlabelable",
            }
        )
    if prev_record is not None and next_record is not None:
        here = _classes_present(record)
        both = _classes_present(prev_record) & _classes_present(next_record)
        for cls in sorted(both - here):
            findings.append(
                {
                    "code": "temporal-gap",
                    "message": f"{CLASS_NAMES[cls]} appears in the neighboring "
                    "frames but not in this one",
                    "class": CLASS_NAMES[cls],
                }
            )
    if consensus is not None and getattr(consensus, "c2", False):
        if SegClass.HEPATOCYSTIC_TRIANGLE_DISSECTION not in _classes_present(record):
            findings.append(
                {
                    "code": "c2-without-triangle-class",
                    "message": "consensus marks the triangle as cleared but no "
                    "dissection region is drawn",
                }
            )
    return findings
