"""Video registration, exclusion screening, and frame decoding.

Exclusion flags are asserted by a human screener; this module records them and
enforces the resulting lifecycle, it does not detect procedure deviations.
Frame decoding sits behind an adapter so the core stays testable without
codecs: a pre-extracted frame-directory reader and an external media-decoder
subprocess are both provided.
"""

from __future__ import annotations

import hashlib
import subprocess
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol

from PIL import Image

from .errors import (
    ConflictError,
    DecodeError,
    ValidationError,
    VersionConflictError,
    WorkflowStateError,
)
from .store import RecordStore

DEFAULT_PROJECT_ID = "default"
DEFAULT_INTERVAL_MS = 30_000

KIND_VIDEO = "video"
KIND_PROJECT = "project"


class ExclusionFlag(str, Enum):
    """Workflow deviations that exclude a video from the dataset."""

    FUNDUS_FIRST = "fundus_first"
    SUBTOTAL_OR_PARTIAL = "subtotal_or_partial"
    INTRAOPERATIVE_CHOLANGIOGRAM = "intraoperative_cholangiogram"
    CONVERSION_TO_OPEN = "conversion_to_open"
    PROCEDURE_ABORTED = "procedure_aborted"


class VideoStatus(str, Enum):
    REGISTERED = "registered"
    EXCLUDED = "excluded"
    ROI_PENDING = "roi_pending"
    ROI_SET = "roi_set"
    SAMPLED = "sampled"
    COMPLETE = "complete"


@dataclass
class ProcedureVideo:
    video_id: str
    project_id: str
    source_uri: str
    checksum: str
    duration_ms: int
    fps: float
    exclusion_flags: set[ExclusionFlag] = field(default_factory=set)
    status: VideoStatus = VideoStatus.REGISTERED
    version: int = 0

    def to_doc(self) -> dict:
        return {
            "video_id": self.video_id,
            "project_id": self.project_id,
            "source_uri": self.source_uri,
            "checksum": self.checksum,
            "duration_ms": self.duration_ms,
            "fps": self.fps,
            "exclusion_flags": sorted(f.value for f in self.exclusion_flags),
            "status": self.status.value,
        }

    @classmethod
    def from_record(cls, record) -> "ProcedureVideo":
        d = record.doc
        return cls(
            video_id=d["video_id"],
            project_id=d["project_id"],
            source_uri=d["source_uri"],
            checksum=d["checksum"],
            duration_ms=d["duration_ms"],
            fps=d["fps"],
            exclusion_flags={ExclusionFlag(f) for f in d["exclusion_flags"]},
            status=VideoStatus(d["status"]),
            version=record.version,
        )


@dataclass(frozen=True)
class FrameImage:
    """A decoded frame. timestamp_ms is the requested grid timestamp; pixels
    come from the nearest decodable frame (source_timestamp_ms)."""

    frame_id: str
    video_id: str
    timestamp_ms: int
    width: int
    height: int
    pixel_data_ref: str
    source_timestamp_ms: int


def format_frame_id(video_id: str, timestamp_ms: int) -> str:
    return f"{video_id}-{timestamp_ms:09d}"


def split_frame_id(frame_id: str) -> tuple[str, int]:
    video_id, _, ts = frame_id.rpartition("-")
    if not video_id or not ts.isdigit():
        raise ValidationError(f"malformed frame id: {frame_id!r}")
    return video_id, int(ts)


def checksum_source(source_uri: str) -> str:
    """sha256 over the full source byte stream. Directories (pre-extracted
    frame sets) hash every file in sorted relative-path order."""
    path = Path(source_uri)
    digest = hashlib.sha256()
    if path.is_dir():
        files = sorted(p for p in path.rglob("*") if p.is_file())
        if not files:
            raise ValidationError(f"source directory is empty: {source_uri}")
        for p in files:
            digest.update(str(p.relative_to(path)).encode())
            digest.update(b"\0")
            digest.update(p.read_bytes())
    elif path.is_file():
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                digest.update(chunk)
    else:
        raise ValidationError(f"source is not readable: {source_uri}")
    return digest.hexdigest()


# -- frame decoding adapters -------------------------------------------------


@dataclass(frozen=True)
class DecodedFrame:
    path: str
    width: int
    height: int
    source_timestamp_ms: int


class FrameDecoder(Protocol):
    def decode(self, video: ProcedureVideo, timestamp_ms: int) -> DecodedFrame: ...


def _nearest_timestamp(available: list[int], target: int) -> int:
    """Nearest available timestamp; exact midpoints resolve to the earlier one."""
    best = None
    for ts in available:
        if best is None:
            best = ts
            continue
        d, bd = abs(ts - target), abs(best - target)
        if d < bd or (d == bd and ts < best):
            best = ts
    if best is None:
        raise DecodeError("no frames available")
    return best


class FrameDirectoryDecoder:
    """Reads pre-extracted frames laid out as <video_id>/<timestamp_ms>.png
    (timestamps zero-padded to 9 digits). When the video's source_uri is
    itself a directory of such files, it is used directly."""

    def __init__(self, root: str | Path | None = None) -> None:
        self.root = Path(root) if root is not None else None

    def _frame_dir(self, video: ProcedureVideo) -> Path:
        if self.root is not None:
            candidate = self.root / video.video_id
            if candidate.is_dir():
                return candidate
        source = Path(video.source_uri)
        if source.is_dir():
            return source
        raise DecodeError(
            f"no frame directory for video {video.video_id} "
            f"(looked under root={self.root} and source={video.source_uri})"
        )

    def decode(self, video: ProcedureVideo, timestamp_ms: int) -> DecodedFrame:
        frame_dir = self._frame_dir(video)
        stamps: dict[int, Path] = {}
        for p in frame_dir.glob("*.png"):
            if p.stem.isdigit():
                stamps[int(p.stem)] = p
        if not stamps:
            raise DecodeError(f"no frames in {frame_dir}")
        chosen = _nearest_timestamp(sorted(stamps), timestamp_ms)
        path = stamps[chosen]
        try:
            with Image.open(path) as img:
                width, height = img.size
        except OSError as exc:
            raise DecodeError(f"unreadable frame file {path}: {exc}") from exc
        return DecodedFrame(str(path), width, height, chosen)


class SubprocessFrameDecoder:
    """Invokes an external media decoder once per timestamp and caches the
    result under <cache>/<video_id>/<timestamp_ms>.png, which makes repeated
    decodes byte-identical. The command is a template list; {source}, {ms},
    {seconds} and {out} are substituted."""

    DEFAULT_COMMAND = (
        "ffmpeg", "-loglevel", "error", "-y",
        "-ss", "{seconds}", "-i", "{source}",
        "-frames:v", "1", "{out}",
    )

    def __init__(self, cache_dir: str | Path, command: tuple[str, ...] | None = None):
        self.cache_dir = Path(cache_dir)
        self.command = tuple(command) if command else self.DEFAULT_COMMAND

    def decode(self, video: ProcedureVideo, timestamp_ms: int) -> DecodedFrame:
        out = self.cache_dir / video.video_id / f"{timestamp_ms:09d}.png"
        if not out.exists():
            out.parent.mkdir(parents=True, exist_ok=True)
            subs = {
                "source": video.source_uri,
                "ms": str(timestamp_ms),
                "seconds": f"{timestamp_ms / 1000:.3f}",
                "out": str(out),
            }
            argv = [part.format(**subs) for part in self.command]
            try:
                proc = subprocess.run(argv, capture_output=True, text=True)
            except FileNotFoundError as exc:
                raise DecodeError(f"decoder executable not found: {argv[0]}") from exc
            if proc.returncode != 0 or not out.exists():
                raise DecodeError(
                    f"decoder failed for {video.video_id}@{timestamp_ms}ms: "
                    f"{proc.stderr.strip()}"
                )
        try:
            with Image.open(out) as img:
                width, height = img.size
        except OSError as exc:
            raise DecodeError(f"decoder produced unreadable file {out}: {exc}") from exc
        return DecodedFrame(str(out), width, height, timestamp_ms)


# -- registry ----------------------------------------------------------------

# Screening may be corrected any time before sampling freezes the frame set;
# this includes un-excluding (idempotence and the excluded⟺flags invariant
# both require re-screening excluded videos to work).
_SCREENABLE = {
    VideoStatus.REGISTERED,
    VideoStatus.ROI_PENDING,
    VideoStatus.ROI_SET,
    VideoStatus.EXCLUDED,
}


class VideoRegistry:
    """Registers videos, applies screening decisions, decodes frames."""

    def __init__(self, store: RecordStore, decoder: FrameDecoder | None = None):
        self.store = store
        self.decoder = decoder

    def ensure_project(self, project_id: str = DEFAULT_PROJECT_ID) -> dict:
        rec = self.store.find(KIND_PROJECT, project_id)
        if rec is not None:
            return rec.doc
        doc = {
            "project_id": project_id,
            "name": project_id,
            "interval_ms": DEFAULT_INTERVAL_MS,
            "checklist_version": "1",
            "class_table_version": "1",
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        self.store.put(KIND_PROJECT, project_id, doc, expected_version=None, actor="system")
        return doc

    def register_video(
        self,
        source_uri: str,
        duration_ms: int,
        fps: float,
        project_id: str = DEFAULT_PROJECT_ID,
        actor: str = "system",
    ) -> ProcedureVideo:
        if duration_ms <= 0:
            raise ValidationError("duration_ms must be positive")
        if fps <= 0:
            raise ValidationError("fps must be positive")
        checksum = checksum_source(source_uri)
        video_id = "v" + checksum[:12]
        self.ensure_project(project_id)
        video = ProcedureVideo(
            video_id=video_id,
            project_id=project_id,
            source_uri=str(source_uri),
            checksum=checksum,
            duration_ms=int(duration_ms),
            fps=float(fps),
        )
        try:
            rec = self.store.put(
                KIND_VIDEO, video_id, video.to_doc(), expected_version=None, actor=actor
            )
        except VersionConflictError as exc:
            # video_id is checksum-derived, so an existing id means the same
            # source bytes were registered before
            raise ConflictError(
                f"video with checksum {checksum[:12]}… already registered as {video_id}"
            ) from exc
        video.version = rec.version
        return video

    def get_video(self, video_id: str) -> ProcedureVideo:
        return ProcedureVideo.from_record(self.store.get(KIND_VIDEO, video_id))

    def list_videos(self, project_id: str | None = None) -> list[ProcedureVideo]:
        videos = [ProcedureVideo.from_record(r) for r in self.store.scan(KIND_VIDEO)]
        if project_id is not None:
            videos = [v for v in videos if v.project_id == project_id]
        return videos

    def screen_video(
        self,
        video_id: str,
        flags: set[ExclusionFlag],
        actor: str = "system",
    ) -> ProcedureVideo:
        video = self.get_video(video_id)
        if video.status not in _SCREENABLE:
            raise WorkflowStateError(
                f"screening is frozen once sampled (video {video_id} is "
                f"{video.status.value})"
            )
        try:
            flags = {ExclusionFlag(f) for f in flags}
        except ValueError as exc:
            known = ", ".join(f.value for f in ExclusionFlag)
            raise ValidationError(
                f"unknown exclusion flag; known flags: {known}"
            ) from exc
        video.exclusion_flags = flags
        if flags:
            video.status = VideoStatus.EXCLUDED
        else:
            has_roi = self.store.find("roi", video_id) is not None
            video.status = VideoStatus.ROI_SET if has_roi else VideoStatus.ROI_PENDING
        rec = self.store.put(
            KIND_VIDEO,
            video_id,
            video.to_doc(),
            expected_version=video.version,
            actor=actor,
        )
        video.version = rec.version
        return video

    def save_status(
        self, video: ProcedureVideo, status: VideoStatus, actor: str = "system"
    ) -> ProcedureVideo:
        video.status = status
        rec = self.store.put(
            KIND_VIDEO,
            video.video_id,
            video.to_doc(),
            expected_version=video.version,
            actor=actor,
        )
        video.version = rec.version
        return video

    def decode_frame(self, video_id: str, timestamp_ms: int) -> FrameImage:
        video = self.get_video(video_id)
        if video.status is VideoStatus.EXCLUDED:
            raise WorkflowStateError(f"video {video_id} is excluded")
        if not 0 <= timestamp_ms <= video.duration_ms:
            raise ValidationError(
                f"timestamp {timestamp_ms}ms outside video duration "
                f"{video.duration_ms}ms"
            )
        if self.decoder is None:
            raise DecodeError("no frame decoder configured")
        decoded = self.decoder.decode(video, int(timestamp_ms))
        return FrameImage(
            frame_id=format_frame_id(video_id, int(timestamp_ms)),
            video_id=video_id,
            timestamp_ms=int(timestamp_ms),
            width=decoded.width,
            height=decoded.height,
            pixel_data_ref=decoded.path,
            source_timestamp_ms=decoded.source_timestamp_ms,
        )
