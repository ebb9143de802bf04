"""Region-of-interest timestamps and deterministic keyframe extraction.

Each video carries three protocol timestamps: dissection start (t_start),
first clip on the cystic duct or artery (t_end), and optionally the first
moment any criterion becomes evaluable (t_evaluable). Sampling lays a regular
grid over the ROI: frames before t_evaluable are auto-labeled all-negative and
never reach a human rater; frames from t_evaluable onward become manual
keyframes. Without an evaluable timestamp the whole ROI is sampled manually.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    DecodeError,
    NotFoundError,
    ValidationError,
    WorkflowStateError,
)
from .ingestion import (
    FrameImage,
    VideoRegistry,
    VideoStatus,
    format_frame_id,
)
from .store import RecordStore

KIND_ROI = "roi"
KIND_PLAN = "plan"
KIND_FRAME_IMAGE = "frame_image"
KIND_AUTO_LABEL = "auto_label"


class FrameOrigin(str, Enum):
    AUTO_NEGATIVE = "auto_negative"
    MANUAL_KEYFRAME = "manual_keyframe"


@dataclass(frozen=True)
class FrameRef:
    video_id: str
    timestamp_ms: int
    origin: FrameOrigin

    @property
    def frame_id(self) -> str:
        return format_frame_id(self.video_id, self.timestamp_ms)


@dataclass
class RegionOfInterest:
    video_id: str
    t_start_ms: int
    t_end_ms: int
    t_evaluable_ms: int | None = None
    version: int = 0

    def to_doc(self) -> dict:
        return {
            "video_id": self.video_id,
            "t_start_ms": self.t_start_ms,
            "t_end_ms": self.t_end_ms,
            "t_evaluable_ms": self.t_evaluable_ms,
        }


@dataclass
class SamplingPlan:
    video_id: str
    interval_ms: int
    auto_negative: list[FrameRef] = field(default_factory=list)
    manual_keyframes: list[FrameRef] = field(default_factory=list)
    materialized: bool = False
    version: int = 0

    def all_frames(self) -> list[FrameRef]:
        return self.auto_negative + self.manual_keyframes

    def find_frame(self, timestamp_ms: int) -> FrameRef | None:
        for ref in self.all_frames():
            if ref.timestamp_ms == timestamp_ms:
                return ref
        return None

    def to_doc(self) -> dict:
        return {
            "video_id": self.video_id,
            "interval_ms": self.interval_ms,
            "auto_timestamps": [f.timestamp_ms for f in self.auto_negative],
            "manual_timestamps": [f.timestamp_ms for f in self.manual_keyframes],
            "materialized": self.materialized,
        }

    @classmethod
    def from_record(cls, record) -> "SamplingPlan":
        d = record.doc
        vid = d["video_id"]
        return cls(
            video_id=vid,
            interval_ms=d["interval_ms"],
            auto_negative=[
                FrameRef(vid, ts, FrameOrigin.AUTO_NEGATIVE) for ts in d["auto_timestamps"]
            ],
            manual_keyframes=[
                FrameRef(vid, ts, FrameOrigin.MANUAL_KEYFRAME)
                for ts in d["manual_timestamps"]
            ],
            materialized=d["materialized"],
            version=record.version,
        )


def keyframe_grid(
    t_start_ms: int,
    t_end_ms: int,
    t_evaluable_ms: int | None,
    interval_ms: int,
) -> tuple[list[int], list[int]]:
    """The extraction grid: (auto_negative timestamps, manual timestamps).

    Manual keyframes run from the evaluable timestamp (or the ROI start when
    none was recorded) in steps of interval_ms up to and including t_end when
    aligned. Auto-negative timestamps reuse the same step anchored at t_start
    and stop strictly before the evaluable timestamp.
    """
    if interval_ms <= 0:
        raise ValidationError("interval_ms must be positive")
    anchor = t_start_ms if t_evaluable_ms is None else t_evaluable_ms
    manual = list(range(anchor, t_end_ms + 1, interval_ms))
    auto: list[int] = []
    if t_evaluable_ms is not None:
        auto = list(range(t_start_ms, t_evaluable_ms, interval_ms))
    return auto, manual


class RoiSampler:
    """Stores ROIs and sampling plans; delegates pixel work to the registry."""

    def __init__(self, store: RecordStore, registry: VideoRegistry):
        self.store = store
        self.registry = registry

    # -- region of interest -------------------------------------------------

    def set_roi(
        self,
        video_id: str,
        t_start_ms: int,
        t_end_ms: int,
        t_evaluable_ms: int | None = None,
        actor: str = "system",
    ) -> RegionOfInterest:
        video = self.registry.get_video(video_id)
        if video.status is VideoStatus.EXCLUDED:
            raise WorkflowStateError(f"video {video_id} is excluded")
        if video.status in (VideoStatus.SAMPLED, VideoStatus.COMPLETE):
            raise WorkflowStateError(
                f"video {video_id} already sampled; delete the plan to re-set the ROI"
            )
        if not 0 <= t_start_ms <= video.duration_ms:
            raise ValidationError("t_start_ms outside video duration")
        if t_end_ms > video.duration_ms:
            raise ValidationError("t_end_ms outside video duration")
        if t_start_ms >= t_end_ms:
            raise ValidationError(
                f"ROI start must precede end (got {t_start_ms} >= {t_end_ms})"
            )
        if t_evaluable_ms is not None and not (
            t_start_ms <= t_evaluable_ms <= t_end_ms
        ):
            raise ValidationError(
                f"evaluable timestamp {t_evaluable_ms} outside ROI "
                f"[{t_start_ms}, {t_end_ms}]"
            )
        roi = RegionOfInterest(video_id, int(t_start_ms), int(t_end_ms),
                               None if t_evaluable_ms is None else int(t_evaluable_ms))
        existing = self.store.find(KIND_ROI, video_id)
        rec = self.store.put(
            KIND_ROI,
            video_id,
            roi.to_doc(),
            expected_version=None if existing is None else existing.version,
            actor=actor,
        )
        roi.version = rec.version
        self.registry.save_status(video, VideoStatus.ROI_SET, actor=actor)
        return roi

    def get_roi(self, video_id: str) -> RegionOfInterest:
        rec = self.store.get(KIND_ROI, video_id)
        d = rec.doc
        return RegionOfInterest(
            d["video_id"], d["t_start_ms"], d["t_end_ms"], d["t_evaluable_ms"],
            version=rec.version,
        )

    # -- sampling ------------------------------------------------------------

    def sample_keyframes(
        self, video_id: str, interval_ms: int, actor: str = "system"
    ) -> SamplingPlan:
        video = self.registry.get_video(video_id)
        if self.store.find(KIND_PLAN, video_id) is not None:
            raise WorkflowStateError(
                f"video {video_id} already has a plan; delete it to re-sample"
            )
        try:
            roi = self.get_roi(video_id)
        except NotFoundError:
            raise NotFoundError(f"video {video_id} has no ROI set") from None
        auto_ts, manual_ts = keyframe_grid(
            roi.t_start_ms, roi.t_end_ms, roi.t_evaluable_ms, interval_ms
        )
        plan = SamplingPlan(
            video_id=video_id,
            interval_ms=int(interval_ms),
            auto_negative=[
                FrameRef(video_id, ts, FrameOrigin.AUTO_NEGATIVE) for ts in auto_ts
            ],
            manual_keyframes=[
                FrameRef(video_id, ts, FrameOrigin.MANUAL_KEYFRAME) for ts in manual_ts
            ],
        )
        rec = self.store.put(
            KIND_PLAN, video_id, plan.to_doc(), expected_version=None, actor=actor
        )
        plan.version = rec.version
        self.registry.save_status(video, VideoStatus.SAMPLED, actor=actor)
        return plan

    def get_plan(self, video_id: str) -> SamplingPlan:
        return SamplingPlan.from_record(self.store.get(KIND_PLAN, video_id))

    def delete_plan(self, video_id: str, actor: str = "system") -> None:
        """Explicit, audit-logged deletion; required before re-sampling because
        downstream annotations reference frame identities."""
        rec = self.store.get(KIND_PLAN, video_id)
        self.store.delete(KIND_PLAN, video_id, expected_version=rec.version, actor=actor)
        video = self.registry.get_video(video_id)
        if video.status is VideoStatus.SAMPLED:
            self.registry.save_status(video, VideoStatus.ROI_SET, actor=actor)

    def find_frame(self, frame_id: str) -> FrameRef:
        from .ingestion import split_frame_id

        video_id, ts = split_frame_id(frame_id)
        try:
            plan = self.get_plan(video_id)
        except NotFoundError:
            raise NotFoundError(f"frame {frame_id}: video has no sampling plan") from None
        ref = plan.find_frame(ts)
        if ref is None:
            raise NotFoundError(f"frame {frame_id} is not part of the sampling plan")
        return ref

    # -- materialization -----------------------------------------------------

    def materialize_plan(self, video_id: str, actor: str = "system") -> list[FrameImage]:
        """Decode every manual keyframe; auto-negative frames only get their
        all-negative label records (no pixel decode). On decoder failures the
        successfully decoded frames are kept but the plan stays incomplete."""
        plan = self.get_plan(video_id)
        images: list[FrameImage] = []
        failures: list[int] = []
        for ref in plan.manual_keyframes:
            try:
                image = self.registry.decode_frame(video_id, ref.timestamp_ms)
            except DecodeError:
                failures.append(ref.timestamp_ms)
                continue
            existing = self.store.find(KIND_FRAME_IMAGE, image.frame_id)
            doc = {
                "frame_id": image.frame_id,
                "video_id": image.video_id,
                "timestamp_ms": image.timestamp_ms,
                "width": image.width,
                "height": image.height,
                "pixel_data_ref": image.pixel_data_ref,
                "source_timestamp_ms": image.source_timestamp_ms,
            }
            if existing is None:
                self.store.put(
                    KIND_FRAME_IMAGE, image.frame_id, doc,
                    expected_version=None, actor=actor,
                )
            elif existing.doc != doc:
                self.store.put(
                    KIND_FRAME_IMAGE, image.frame_id, doc,
                    expected_version=existing.version, actor=actor,
                )
            images.append(image)
        for ref in plan.auto_negative:
            if self.store.find(KIND_AUTO_LABEL, ref.frame_id) is None:
                self.store.put(
                    KIND_AUTO_LABEL,
                    ref.frame_id,
                    {
                        "frame_id": ref.frame_id,
                        "video_id": video_id,
                        "timestamp_ms": ref.timestamp_ms,
                        "c1": False,
                        "c2": False,
                        "c3": False,
                        "source": "automatic",
                    },
                    expected_version=None,
                    actor=actor,
                )
        if failures:
            raise DecodeError(
                f"decoder failed for {len(failures)} frame(s) of {video_id} at "
                f"{failures}; {len(images)} decoded"
            )
        if not plan.materialized:
            plan.materialized = True
            self.store.put(
                KIND_PLAN, video_id, plan.to_doc(),
                expected_version=plan.version, actor=actor,
            )
        return images

    def get_frame_image(self, frame_id: str) -> FrameImage:
        d = self.store.get(KIND_FRAME_IMAGE, frame_id).doc
        return FrameImage(
            frame_id=d["frame_id"],
            video_id=d["video_id"],
            timestamp_ms=d["timestamp_ms"],
            width=d["width"],
            height=d["height"],
            pixel_data_ref=d["pixel_data_ref"],
            source_timestamp_ms=d["source_timestamp_ms"],
        )
