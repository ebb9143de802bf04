"""Gated dataset export and archive validation.

An export is a directory: manifest.json plus masks/ (index PNGs rendered from
the approved polygons) and optionally frames/ (the decoded keyframe pixels).
The manifest is canonical JSON with no floats and no timestamps, so the same
store state always produces byte-identical output. The checksum covers the
manifest (without its own checksum field) followed by every file in sorted
path order."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .assessment import (
    MIN_RATERS,
    AssessmentService,
    majority,
)
from .checklist import CHECKLIST_VERSION
from .errors import GateBlockedError, NotFoundError, ValidationError
from .ingestion import KIND_VIDEO, ProcedureVideo, VideoStatus
from .sampling import (
    KIND_AUTO_LABEL,
    KIND_FRAME_IMAGE,
    KIND_ROI,
    FrameOrigin,
    RoiSampler,
)
from .segmentation import (
    CLASS_NAMES,
    CLASS_TABLE_VERSION,
    SegmentationService,
    SegStatus,
    mask_to_png_bytes,
    png_bytes_to_mask,
    rasterize,
)
from .store import RecordStore

KIND_EXPORT_LOG = "export_log"

MANIFEST_NAME = "manifest.json"
SCHEMA_NAME = "dataset_manifest_v1.json"


def load_manifest_schema() -> dict:
    text = resources.files("cvsannot.schemas").joinpath(SCHEMA_NAME).read_text()
    return json.loads(text)


def canonical_json(doc: dict) -> str:
    _reject_floats(doc, "$")
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _reject_floats(value, path: str) -> None:
    if isinstance(value, float):
        raise ValidationError(f"manifest may not contain floats: {path} = {value}")
    if isinstance(value, dict):
        for k, v in value.items():
            _reject_floats(v, f"{path}.{k}")
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _reject_floats(v, f"{path}[{i}]")


def compute_export_checksum(manifest_sans_checksum: dict, files: dict[str, bytes]) -> str:
    h = hashlib.sha256()
    h.update(canonical_json(manifest_sans_checksum).encode())
    for relpath in sorted(files):
        h.update(relpath.encode())
        h.update(b"\0")
        h.update(files[relpath])
    return h.hexdigest()


@dataclass(frozen=True)
class GateItem:
    video_id: str
    frame_id: str | None
    reasons: tuple[str, ...]

    def to_doc(self) -> dict:
        return {
            "video_id": self.video_id,
            "frame_id": self.frame_id,
            "reasons": list(self.reasons),
        }


@dataclass(frozen=True)
class ExportResult:
    out_dir: Path
    checksum: str
    n_videos: int
    n_frames: int
    omitted: tuple[GateItem, ...]


class DatasetExporter:
    def __init__(
        self,
        store: RecordStore,
        sampler: RoiSampler,
        assessments: AssessmentService,
        segmentation: SegmentationService,
    ):
        self.store = store
        self.sampler = sampler
        self.assessments = assessments
        self.segmentation = segmentation

    def _project_videos(self, project_id: str) -> list[ProcedureVideo]:
        videos = [
            ProcedureVideo.from_record(r)
            for r in self.store.scan(KIND_VIDEO)
            if r.doc["project_id"] == project_id
        ]
        if not videos:
            raise NotFoundError(f"project {project_id} has no videos")
        return sorted(videos, key=lambda v: v.video_id)

    # -- gate ----------------------------------------------------------------

    def check_export_gate(self, project_id: str) -> list[GateItem]:
        """Everything that currently blocks a full export. Empty means go."""
        items: list[GateItem] = []
        for video in self._project_videos(project_id):
            if video.status is VideoStatus.EXCLUDED:
                continue
            try:
                plan = self.sampler.get_plan(video.video_id)
            except NotFoundError:
                items.append(
                    GateItem(video.video_id, None, ("video is not sampled",))
                )
                continue
            for ref in plan.auto_negative:
                if self.store.find(KIND_AUTO_LABEL, ref.frame_id) is None:
                    items.append(
                        GateItem(
                            video.video_id,
                            ref.frame_id,
                            ("auto label missing; run materialization",),
                        )
                    )
            for ref in plan.manual_keyframes:
                reasons: list[str] = []
                if self.store.find(KIND_FRAME_IMAGE, ref.frame_id) is None:
                    reasons.append("frame image missing; run materialization")
                n = len(self.assessments.list_assessments(ref.frame_id))
                if n < MIN_RATERS:
                    reasons.append(
                        f"has {n} of {MIN_RATERS} required assessments"
                    )
                seg = self.segmentation.find_segmentation(ref.frame_id)
                if seg is None:
                    reasons.append("no segmentation")
                elif seg.status is not SegStatus.APPROVED:
                    reasons.append(f"segmentation is {seg.status.value}")
                if reasons:
                    items.append(GateItem(video.video_id, ref.frame_id, tuple(reasons)))
        return items

    # -- export --------------------------------------------------------------

    def export_dataset(
        self,
        project_id: str,
        out_dir: str | Path,
        partial: bool = False,
        materialize_frames: bool = False,
        actor: str = "system",
    ) -> ExportResult:
        blockers = self.check_export_gate(project_id)
        if blockers and not partial:
            preview = "; ".join(
                f"{b.frame_id or b.video_id}: {', '.join(b.reasons)}"
                for b in blockers[:5]
            )
            more = "" if len(blockers) <= 5 else f" (and {len(blockers) - 5} more)"
            raise GateBlockedError(
                f"export blocked by {len(blockers)} item(s): {preview}{more}",
                blockers=[b.to_doc() for b in blockers],
            )
        blocked_frames = {b.frame_id for b in blockers if b.frame_id is not None}
        blocked_videos = {b.video_id for b in blockers if b.frame_id is None}

        videos_out = []
        frames_out = []
        files: dict[str, bytes] = {}
        n_frames = 0
        for video in self._project_videos(project_id):
            roi_rec = self.store.find(KIND_ROI, video.video_id)
            roi_doc = None
            if roi_rec is not None:
                roi_doc = {
                    "t_start_ms": roi_rec.doc["t_start_ms"],
                    "t_end_ms": roi_rec.doc["t_end_ms"],
                    "t_evaluable_ms": roi_rec.doc["t_evaluable_ms"],
                }
            plan = None
            if video.status not in (VideoStatus.EXCLUDED,):
                try:
                    plan = self.sampler.get_plan(video.video_id)
                except NotFoundError:
                    plan = None
            videos_out.append(
                {
                    "video_id": video.video_id,
                    "status": video.status.value,
                    "exclusion_flags": sorted(f.value for f in video.exclusion_flags),
                    "roi": roi_doc,
                    "interval_ms": None if plan is None else plan.interval_ms,
                }
            )
            if plan is None or video.video_id in blocked_videos:
                continue
            for ref in sorted(plan.all_frames(), key=lambda r: r.timestamp_ms):
                if ref.frame_id in blocked_frames:
                    continue
                row = self._frame_row(ref, files, materialize_frames)
                if row is not None:
                    frames_out.append(row)
                    n_frames += 1

        manifest = {
            "manifest_version": 1,
            "project_id": project_id,
            "partial": bool(blockers),
            "checklist_version": CHECKLIST_VERSION,
            "class_table_version": CLASS_TABLE_VERSION,
            "class_index_table": {str(int(k)): v for k, v in CLASS_NAMES.items()},
            "videos": videos_out,
            "frames": frames_out,
            "omitted": [b.to_doc() for b in blockers],
        }
        checksum = compute_export_checksum(manifest, files)
        manifest["export_checksum"] = checksum

        jsonschema.validate(manifest, load_manifest_schema())

        out = Path(out_dir)
        if out.exists() and any(out.iterdir()):
            raise ValidationError(f"output directory {out} is not empty")
        out.mkdir(parents=True, exist_ok=True)
        (out / MANIFEST_NAME).write_text(canonical_json(manifest))
        for relpath, data in files.items():
            target = out / relpath
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)

        existing = self.store.find(KIND_EXPORT_LOG, checksum)
        self.store.put(
            KIND_EXPORT_LOG,
            checksum,
            {
                "project_id": project_id,
                "export_checksum": checksum,
                "partial": bool(blockers),
                "n_videos": len(videos_out),
                "n_frames": n_frames,
            },
            expected_version=None if existing is None else existing.version,
            actor=actor,
        )
        return ExportResult(
            out_dir=out,
            checksum=checksum,
            n_videos=len(videos_out),
            n_frames=n_frames,
            omitted=tuple(blockers),
        )

    def _frame_row(
        self, ref, files: dict[str, bytes], materialize_frames: bool
    ) -> dict | None:
        if ref.origin is FrameOrigin.AUTO_NEGATIVE:
            auto = self.store.find(KIND_AUTO_LABEL, ref.frame_id)
            if auto is None:
                return None
            return {
                "frame_id": ref.frame_id,
                "video_id": ref.video_id,
                "timestamp_ms": ref.timestamp_ms,
                "origin": ref.origin.value,
                "mask_file": None,
                "frame_file": None,
                "cvs": {
                    "raw": [],
                    "consensus": {
                        "c1": auto.doc["c1"],
                        "c2": auto.doc["c2"],
                        "c3": auto.doc["c3"],
                        "cvs": auto.doc["c1"] and auto.doc["c2"] and auto.doc["c3"],
                        "n_raters": 0,
                        "source": "automatic",
                    },
                },
                "segmentation": None,
            }
        raw = self.assessments.list_assessments(ref.frame_id)
        consensus = self.assessments.compute_consensus(ref.frame_id)
        seg = self.segmentation.get_segmentation(ref.frame_id)
        image = self.sampler.get_frame_image(ref.frame_id)
        mask = rasterize(seg.polygons, image.width, image.height)
        mask_rel = f"masks/{ref.frame_id}.png"
        files[mask_rel] = mask_to_png_bytes(mask)
        frame_rel = None
        if materialize_frames:
            frame_rel = f"frames/{ref.frame_id}.png"
            files[frame_rel] = Path(image.pixel_data_ref).read_bytes()
        return {
            "frame_id": ref.frame_id,
            "video_id": ref.video_id,
            "timestamp_ms": ref.timestamp_ms,
            "origin": ref.origin.value,
            "mask_file": mask_rel,
            "frame_file": frame_rel,
            "cvs": {
                "raw": [
                    {"rater_id": a.rater_id, "c1": a.c1, "c2": a.c2, "c3": a.c3}
                    for a in raw
                ],
                "consensus": {
                    "c1": consensus.c1,
                    "c2": consensus.c2,
                    "c3": consensus.c3,
                    "cvs": consensus.cvs,
                    "n_raters": consensus.n_raters,
                    "source": consensus.source,
                },
            },
            "segmentation": {
                "author_id": seg.author_id,
                "reviewer_id": seg.reviewer_id,
                "status": seg.status.value,
                "n_polygons": len(seg.polygons),
            },
        }


# -- archive validation ----------------------------------------------------------


def validate_archive(path: str | Path) -> list[dict]:
    """Independent integrity check of an exported directory. Returns a list
    of violations; an intact archive yields []."""
    root = Path(path)
    violations: list[dict] = []

    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        return [{"code": "manifest-missing", "detail": str(manifest_path)}]
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        return [{"code": "manifest-unparseable", "detail": str(exc)}]

    validator = jsonschema.Draft202012Validator(load_manifest_schema())
    for error in validator.iter_errors(manifest):
        violations.append({"code": "schema-invalid", "detail": error.message})
    if violations:
        return violations

    claimed = manifest.pop("export_checksum")
    disk_files: dict[str, bytes] = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p != manifest_path:
            disk_files[p.relative_to(root).as_posix()] = p.read_bytes()
    actual = compute_export_checksum(manifest, disk_files)
    if actual != claimed:
        violations.append(
            {
                "code": "checksum-mismatch",
                "detail": f"manifest claims {claimed[:12]}.., content hashes to {actual[:12]}..",
            }
        )
    manifest["export_checksum"] = claimed

    referenced: set[str] = set()
    valid_indices = {int(k) for k in manifest["class_index_table"]}
    for row in manifest["frames"]:
        fid = row["frame_id"]
        for key in ("mask_file", "frame_file"):
            rel = row[key]
            if rel is None:
                continue
            referenced.add(rel)
            if rel not in disk_files:
                violations.append(
                    {"code": "dangling-file", "detail": f"{fid}: {rel} not in archive"}
                )
        if row["origin"] == "manual_keyframe":
            raters = [a["rater_id"] for a in row["cvs"]["raw"]]
            if len(set(raters)) < MIN_RATERS:
                violations.append(
                    {
                        "code": "missing-raters",
                        "detail": f"{fid} has {len(set(raters))} raters, needs {MIN_RATERS}",
                    }
                )
            seg = row["segmentation"]
            if seg is None or seg["status"] != "approved":
                violations.append(
                    {"code": "unapproved-segmentation", "detail": fid}
                )
            elif seg["author_id"] == seg["reviewer_id"]:
                violations.append(
                    {
                        "code": "self-review",
                        "detail": f"{fid} reviewed by its author {seg['author_id']}",
                    }
                )
            cons = row["cvs"]["consensus"]
            if cons["source"] != "voted":
                violations.append(
                    {"code": "consensus-mismatch", "detail": f"{fid} manual frame not voted"}
                )
            else:
                for key in ("c1", "c2", "c3"):
                    votes = [a[key] for a in row["cvs"]["raw"]]
                    if votes and majority(votes) != cons[key]:
                        violations.append(
                            {
                                "code": "consensus-mismatch",
                                "detail": f"{fid} {key} disagrees with the raw votes",
                            }
                        )
                if cons["cvs"] != (cons["c1"] and cons["c2"] and cons["c3"]):
                    violations.append(
                        {
                            "code": "consensus-mismatch",
                            "detail": f"{fid} overall flag is not the conjunction",
                        }
                    )
        else:
            cons = row["cvs"]["consensus"]
            if row["cvs"]["raw"]:
                violations.append(
                    {"code": "auto-frame-with-raw", "detail": fid}
                )
            if cons["source"] != "automatic" or cons["c1"] or cons["c2"] or cons["c3"]:
                violations.append(
                    {
                        "code": "consensus-mismatch",
                        "detail": f"{fid} auto frame must be automatic all-negative",
                    }
                )

    for rel, data in disk_files.items():
        if rel not in referenced:
            violations.append({"code": "unreferenced-file", "detail": rel})
            continue
        if rel.startswith("masks/"):
            try:
                mask = png_bytes_to_mask(data)
            except (ValidationError, OSError) as exc:
                violations.append({"code": "mask-unreadable", "detail": f"{rel}: {exc}"})
                continue
            bad = set(np.unique(mask)) - valid_indices
            if bad:
                violations.append(
                    {
                        "code": "class-out-of-range",
                        "detail": f"{rel} contains indices {sorted(int(b) for b in bad)}",
                    }
                )

    return violations
