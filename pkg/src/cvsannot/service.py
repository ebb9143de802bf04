"""HTTP surface over the annotation services.

Identity comes from a bearer token when a token file is configured
({token: annotator_id} JSON); without one the server trusts the
X-Annotator-Id header, which is only sane for single-user local use. Every
domain error class maps to one status code so clients never see a bare 500
for a rule violation."""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse, Response
from pydantic import BaseModel, Field

from .agreement import QaService
from .annotators import AnnotatorDirectory
from .assessment import AssessmentService
from .checklist import checklist_as_doc
from .errors import (
    AnnotationError,
    ConflictError,
    DecodeError,
    GateBlockedError,
    NotFoundError,
    PermissionDeniedError,
    StorageError,
    ValidationError,
    VersionConflictError,
    WorkflowStateError,
)
from .export import DatasetExporter
from .ingestion import FrameDirectoryDecoder, VideoRegistry
from .sampling import RoiSampler
from .segmentation import SegmentationService, mask_to_png_bytes
from .store import RecordStore

STATUS_BY_ERROR = {
    ValidationError: 422,
    DecodeError: 422,
    NotFoundError: 404,
    VersionConflictError: 409,
    ConflictError: 409,
    WorkflowStateError: 409,
    GateBlockedError: 409,
    PermissionDeniedError: 403,
    StorageError: 500,
}


class VideoIn(BaseModel):
    source_uri: str
    duration_ms: int
    fps: float
    project_id: str = "default"


class ScreeningIn(BaseModel):
    flags: list[str] = Field(default_factory=list)


class RoiIn(BaseModel):
    t_start_ms: int
    t_end_ms: int
    t_evaluable_ms: int | None = None


class SamplingIn(BaseModel):
    interval_ms: int = 30_000
    materialize: bool = False


class AssignIn(BaseModel):
    rater_ids: list[str]


class AssessmentIn(BaseModel):
    c1: bool
    c2: bool
    c3: bool
    comment: str = ""


class SegmentationIn(BaseModel):
    shapes: list[dict]
    draft: bool = False


class ReviewIn(BaseModel):
    approve: bool
    comment: str = ""


class BatchIn(BaseModel):
    size: int
    seed: int
    project_id: str | None = None


class ExportIn(BaseModel):
    out_dir: str
    partial: bool = False
    materialize_frames: bool = False


class AnnotatorIn(BaseModel):
    annotator_id: str
    display_name: str = ""
    roles: list[str]


def _video_doc(video) -> dict:
    return {
        "video_id": video.video_id,
        "project_id": video.project_id,
        "source_uri": video.source_uri,
        "checksum": video.checksum,
        "duration_ms": video.duration_ms,
        "fps": video.fps,
        "status": video.status.value,
        "exclusion_flags": sorted(f.value for f in video.exclusion_flags),
        "version": video.version,
    }


def _seg_doc(record) -> dict:
    return record.to_doc() | {"record_id": record.record_id, "version": record.version}


def create_app(
    store_path: str | Path = ":memory:",
    tokens_path: str | Path | None = None,
    frames_root: str | Path | None = None,
) -> FastAPI:
    store = RecordStore(store_path)
    registry = VideoRegistry(store, FrameDirectoryDecoder(frames_root))
    sampler = RoiSampler(store, registry)
    directory = AnnotatorDirectory(store)
    assessments = AssessmentService(store, directory, sampler)
    segmentation = SegmentationService(store, directory, sampler)
    qa = QaService(store, sampler)
    exporter = DatasetExporter(store, sampler, assessments, segmentation)

    tokens: dict[str, str] | None = None
    if tokens_path is not None:
        tokens = json.loads(Path(tokens_path).read_text())

    app = FastAPI(title="cvsannot", version="0.1.0")
    app.state.store = store
    # browser clients live on their own origin; answer preflights for them
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["X-Anchor-Timestamp-Ms"],
    )

    def identity(request: Request) -> str:
        if tokens is None:
            return request.headers.get("x-annotator-id", "system")
        header = request.headers.get("authorization", "")
        scheme, _, token = header.partition(" ")
        if scheme.lower() != "bearer" or not token:
            raise HTTPException(status_code=401, detail="bearer token required")
        annotator_id = tokens.get(token.strip())
        if annotator_id is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return annotator_id

    def annotation_error(request: Request, exc: AnnotationError) -> JSONResponse:
        status = STATUS_BY_ERROR.get(type(exc), 500)
        body = {"error": type(exc).__name__, "detail": str(exc)}
        if isinstance(exc, GateBlockedError):
            body["blockers"] = exc.blockers
        return JSONResponse(status_code=status, content=body)

    for cls in STATUS_BY_ERROR:
        app.add_exception_handler(cls, annotation_error)
    app.add_exception_handler(AnnotationError, annotation_error)

    # -- videos ---------------------------------------------------------------

    @app.post("/videos", status_code=201)
    def register_video(body: VideoIn, actor: str = Depends(identity)):
        video = registry.register_video(
            body.source_uri,
            duration_ms=body.duration_ms,
            fps=body.fps,
            project_id=body.project_id,
            actor=actor,
        )
        return _video_doc(video)

    @app.get("/videos")
    def list_videos(project_id: str | None = None):
        return [_video_doc(v) for v in registry.list_videos(project_id)]

    @app.get("/videos/{video_id}")
    def get_video(video_id: str):
        return _video_doc(registry.get_video(video_id))

    @app.post("/videos/{video_id}/screening")
    def screen_video(video_id: str, body: ScreeningIn, actor: str = Depends(identity)):
        return _video_doc(registry.screen_video(video_id, body.flags, actor=actor))

    @app.put("/videos/{video_id}/roi")
    def set_roi(video_id: str, body: RoiIn, actor: str = Depends(identity)):
        roi = sampler.set_roi(
            video_id,
            body.t_start_ms,
            body.t_end_ms,
            body.t_evaluable_ms,
            actor=actor,
        )
        return roi.to_doc() | {"version": roi.version}

    @app.get("/videos/{video_id}/roi")
    def get_roi(video_id: str):
        roi = sampler.get_roi(video_id)
        return roi.to_doc() | {"version": roi.version}

    @app.post("/videos/{video_id}/sampling", status_code=201)
    def sample_video(video_id: str, body: SamplingIn, actor: str = Depends(identity)):
        plan = sampler.sample_keyframes(video_id, body.interval_ms, actor=actor)
        if body.materialize:
            sampler.materialize_plan(video_id, actor=actor)
            plan = sampler.get_plan(video_id)
        return plan.to_doc()

    @app.get("/videos/{video_id}/plan")
    def get_plan(video_id: str):
        return sampler.get_plan(video_id).to_doc()

    @app.delete("/videos/{video_id}/plan")
    def delete_plan(video_id: str, actor: str = Depends(identity)):
        sampler.delete_plan(video_id, actor=actor)
        return {"deleted": True}

    @app.get("/videos/{video_id}/stream")
    def stream_frame(video_id: str, t: int = Query(ge=0)):
        image = registry.decode_frame(video_id, t)
        return FileResponse(
            image.pixel_data_ref,
            media_type="image/png",
            headers={"X-Anchor-Timestamp-Ms": str(image.source_timestamp_ms)},
        )

    @app.get("/videos/{video_id}/queue")
    def review_queue(video_id: str, reviewer: str = Depends(identity)):
        return qa.sequential_review_queue(video_id, reviewer)

    # -- frames ---------------------------------------------------------------

    @app.get("/frames/{frame_id}")
    def get_frame(frame_id: str):
        ref = sampler.find_frame(frame_id)
        doc = {
            "frame_id": ref.frame_id,
            "video_id": ref.video_id,
            "timestamp_ms": ref.timestamp_ms,
            "origin": ref.origin.value,
            "image": None,
        }
        try:
            image = sampler.get_frame_image(frame_id)
        except NotFoundError:
            return doc
        doc["image"] = {
            "width": image.width,
            "height": image.height,
            "source_timestamp_ms": image.source_timestamp_ms,
        }
        return doc

    @app.get("/frames/{frame_id}/image")
    def get_frame_image(frame_id: str):
        image = sampler.get_frame_image(frame_id)
        return FileResponse(image.pixel_data_ref, media_type="image/png")

    @app.post("/frames/{frame_id}/cvs/assign")
    def assign_raters(frame_id: str, body: AssignIn, actor: str = Depends(identity)):
        raters = assessments.assign_raters(frame_id, body.rater_ids, actor=actor)
        return {"target_id": frame_id, "rater_ids": raters}

    @app.post("/frames/{frame_id}/cvs", status_code=201)
    def submit_assessment(
        frame_id: str, body: AssessmentIn, rater: str = Depends(identity)
    ):
        a = assessments.submit_assessment(
            frame_id, rater, body.c1, body.c2, body.c3, comment=body.comment
        )
        return a.to_doc() | {"cvs": a.cvs, "version": a.version}

    @app.get("/frames/{frame_id}/cvs")
    def list_assessments(frame_id: str):
        assessments.check_target(frame_id)
        docs = [
            a.to_doc() | {"cvs": a.cvs, "version": a.version}
            for a in assessments.list_assessments(frame_id)
        ]
        return {"target_id": frame_id, "assessments": docs}

    @app.get("/frames/{frame_id}/consensus")
    def get_consensus(frame_id: str):
        return assessments.compute_consensus(frame_id).to_doc()

    @app.post("/frames/{frame_id}/segmentation", status_code=201)
    def submit_segmentation(
        frame_id: str, body: SegmentationIn, author: str = Depends(identity)
    ):
        record = segmentation.submit_segmentation(
            frame_id, author, body.shapes, as_draft=body.draft
        )
        return _seg_doc(record)

    @app.get("/frames/{frame_id}/segmentation")
    def get_segmentation(frame_id: str):
        record = segmentation.find_segmentation(frame_id)
        if record is None:
            raise NotFoundError(f"frame {frame_id} has no segmentation")
        return _seg_doc(record)

    @app.get("/frames/{frame_id}/mask")
    def get_mask(frame_id: str):
        mask = segmentation.render_mask(frame_id)
        return Response(content=mask_to_png_bytes(mask), media_type="image/png")

    # -- segmentation review ----------------------------------------------------

    @app.post("/segmentations/{record_id}/review")
    def review_segmentation(
        record_id: str, body: ReviewIn, reviewer: str = Depends(identity)
    ):
        record = segmentation.review_segmentation(
            record_id, reviewer, approve=body.approve, comment=body.comment
        )
        return _seg_doc(record)

    @app.post("/segmentations/{record_id}/claim")
    def claim_review(record_id: str, reviewer: str = Depends(identity)):
        return _seg_doc(segmentation.claim_review(record_id, reviewer))

    # -- qa ----------------------------------------------------------------------

    @app.get("/qa/kappa")
    def kappa(scope: str = "project:default", criterion: str = "cvs"):
        kind, _, name = scope.partition(":")
        if kind == "video" and name:
            report = qa.agreement_report(criterion, video_id=name)
        elif kind == "project" and name:
            report = qa.agreement_report(criterion, project_id=name)
        else:
            raise ValidationError(
                f"scope must look like project:<id> or video:<id>, got {scope!r}"
            )
        return report.to_doc()

    @app.post("/qa/batches", status_code=201)
    def make_batch(body: BatchIn, actor: str = Depends(identity)):
        batch = qa.make_review_batch(
            body.size, body.seed, project_id=body.project_id, actor=actor
        )
        return {k: v for k, v in batch.items() if k != "sources"}

    @app.get("/qa/batches/{batch_id}")
    def get_batch(batch_id: str):
        return qa.get_batch(batch_id)

    # -- checklist, annotators, export --------------------------------------------

    @app.get("/checklist")
    def get_checklist():
        return checklist_as_doc()

    @app.post("/annotators", status_code=201)
    def register_annotator(body: AnnotatorIn, actor: str = Depends(identity)):
        annotator = directory.register(
            body.annotator_id,
            body.display_name or body.annotator_id,
            body.roles,
            actor=actor,
        )
        return {
            "annotator_id": annotator.annotator_id,
            "display_name": annotator.display_name,
            "roles": sorted(r.value for r in annotator.roles),
        }

    @app.get("/annotators")
    def list_annotators():
        return [
            {
                "annotator_id": a.annotator_id,
                "display_name": a.display_name,
                "roles": sorted(r.value for r in a.roles),
            }
            for a in directory.list()
        ]

    @app.get("/projects/{project_id}/gate")
    def gate(project_id: str):
        items = exporter.check_export_gate(project_id)
        return {"ready": not items, "blockers": [i.to_doc() for i in items]}

    @app.post("/projects/{project_id}/export", status_code=201)
    def export_project(project_id: str, body: ExportIn, actor: str = Depends(identity)):
        result = exporter.export_dataset(
            project_id,
            body.out_dir,
            partial=body.partial,
            materialize_frames=body.materialize_frames,
            actor=actor,
        )
        return {
            "out_dir": str(result.out_dir),
            "export_checksum": result.checksum,
            "n_videos": result.n_videos,
            "n_frames": result.n_frames,
            "omitted": [o.to_doc() for o in result.omitted],
        }

    return app
