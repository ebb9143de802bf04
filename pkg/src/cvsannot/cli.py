"""Command line interface.

Commands print JSON documents on stdout so they compose with jq and scripts;
`qa kappa` additionally renders a human table and, with --out-dir, writes the
CSV, JSON, and heatmap files. Exit codes: 0 success, 1 usage or rule
violation, 2 I/O failure."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .agreement import QaService
from .annotators import AnnotatorDirectory
from .assessment import AssessmentService
from .errors import AnnotationError, GateBlockedError, StorageError
from .export import DatasetExporter, validate_archive
from .ingestion import DEFAULT_INTERVAL_MS, FrameDirectoryDecoder, VideoRegistry
from .reporting import render_table, write_report_files
from .sampling import RoiSampler
from .segmentation import (
    SegmentationService,
    lint_segmentation,
    mask_to_png_bytes,
)
from .store import RecordStore


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def emit(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


class Services:
    def __init__(self, args):
        store_path = args.store or os.environ.get("CVSA_STORE") or "cvsannot.db"
        frames_root = getattr(args, "frames_root", None) or os.environ.get(
            "CVSA_FRAMES_ROOT"
        )
        self.store = RecordStore(store_path)
        self.registry = VideoRegistry(self.store, FrameDirectoryDecoder(frames_root))
        self.sampler = RoiSampler(self.store, self.registry)
        self.directory = AnnotatorDirectory(self.store)
        self.assessments = AssessmentService(self.store, self.directory, self.sampler)
        self.segmentation = SegmentationService(self.store, self.directory, self.sampler)
        self.qa = QaService(self.store, self.sampler)
        self.exporter = DatasetExporter(
            self.store, self.sampler, self.assessments, self.segmentation
        )


def split_csv(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


# -- command handlers ------------------------------------------------------------


def cmd_ingest(args) -> int:
    s = Services(args)
    video = s.registry.register_video(
        args.source,
        duration_ms=args.duration_ms,
        fps=args.fps,
        project_id=args.project,
        actor=args.actor,
    )
    emit(video.to_doc() | {"video_id": video.video_id})
    return 0


def cmd_screen(args) -> int:
    s = Services(args)
    video = s.registry.screen_video(args.video, split_csv(args.flags), actor=args.actor)
    emit(video.to_doc() | {"video_id": video.video_id})
    return 0


def cmd_roi_set(args) -> int:
    s = Services(args)
    roi = s.sampler.set_roi(
        args.video,
        args.start_ms,
        args.end_ms,
        args.evaluable_ms,
        actor=args.actor,
    )
    emit(roi.to_doc())
    return 0


def cmd_sample(args) -> int:
    s = Services(args)
    plan = s.sampler.sample_keyframes(args.video, args.interval_ms, actor=args.actor)
    if args.materialize:
        s.sampler.materialize_plan(args.video, actor=args.actor)
        plan = s.sampler.get_plan(args.video)
    emit(plan.to_doc())
    return 0


def cmd_materialize(args) -> int:
    s = Services(args)
    images = s.sampler.materialize_plan(args.video, actor=args.actor)
    emit({"video_id": args.video, "decoded": len(images)})
    return 0


def cmd_cvs_assign(args) -> int:
    s = Services(args)
    raters = s.assessments.assign_raters(
        args.target, split_csv(args.raters), actor=args.actor
    )
    emit({"target_id": args.target, "rater_ids": raters})
    return 0


def cmd_cvs_submit(args) -> int:
    s = Services(args)
    a = s.assessments.submit_assessment(
        args.target, args.rater, args.c1, args.c2, args.c3, comment=args.comment
    )
    emit(a.to_doc() | {"cvs": a.cvs, "version": a.version})
    return 0


def cmd_cvs_consensus(args) -> int:
    s = Services(args)
    emit(s.assessments.compute_consensus(args.target).to_doc())
    return 0


def cmd_seg_submit(args) -> int:
    s = Services(args)
    doc = json.loads(Path(args.shapes_file).read_text())
    shapes = doc["shapes"] if isinstance(doc, dict) else doc
    frame_id = args.frame or (doc.get("frame_id") if isinstance(doc, dict) else None)
    if not frame_id:
        raise AnnotationError("no frame id: pass --frame or put frame_id in the file")
    record = s.segmentation.submit_segmentation(
        frame_id, args.author, shapes, as_draft=args.draft
    )
    emit(record.to_doc() | {"record_id": record.record_id, "version": record.version})
    return 0


def cmd_seg_review(args) -> int:
    s = Services(args)
    record = s.segmentation.review_segmentation(
        args.record, args.reviewer, approve=args.approve, comment=args.comment
    )
    emit(record.to_doc() | {"record_id": record.record_id})
    return 0


def cmd_seg_lint(args) -> int:
    s = Services(args)
    record = s.segmentation.get_segmentation(args.frame)
    prev_rec = s.segmentation.find_segmentation(args.prev) if args.prev else None
    next_rec = s.segmentation.find_segmentation(args.next) if args.next else None
    consensus = s.assessments.try_consensus(record.frame_id)
    findings = lint_segmentation(
        record, prev_record=prev_rec, next_record=next_rec, consensus=consensus
    )
    emit({"frame_id": record.frame_id, "findings": findings})
    return 0


def cmd_seg_mask(args) -> int:
    s = Services(args)
    mask = s.segmentation.render_mask(args.frame)
    Path(args.out).write_bytes(mask_to_png_bytes(mask))
    emit({"frame_id": args.frame, "out": args.out, "shape": list(mask.shape)})
    return 0


def parse_scope(scope: str) -> dict:
    kind, _, name = scope.partition(":")
    if kind == "video" and name:
        return {"video_id": name}
    if kind == "project" and name:
        return {"project_id": name}
    raise AnnotationError(
        f"scope must look like project:<id> or video:<id>, got {scope!r}"
    )


def cmd_qa_kappa(args) -> int:
    s = Services(args)
    report = s.qa.agreement_report(args.criterion, **parse_scope(args.scope))
    sys.stdout.write(render_table(report))
    if args.out_dir:
        paths = write_report_files(report, args.out_dir)
        sys.stdout.write(
            "wrote " + ", ".join(str(p) for p in paths.values()) + "\n"
        )
    return 0


def cmd_qa_batch(args) -> int:
    s = Services(args)
    batch = s.qa.make_review_batch(
        args.size, args.seed, project_id=args.project, actor=args.actor
    )
    emit({k: v for k, v in batch.items() if k != "sources"})
    return 0


def cmd_qa_queue(args) -> int:
    s = Services(args)
    emit(s.qa.sequential_review_queue(args.video, args.reviewer))
    return 0


def cmd_export(args) -> int:
    s = Services(args)
    try:
        result = s.exporter.export_dataset(
            args.project,
            args.out,
            partial=args.partial,
            materialize_frames=args.materialize_frames,
            actor=args.actor,
        )
    except GateBlockedError as exc:
        sys.stderr.write(f"{exc}\n")
        for b in exc.blockers:
            sys.stderr.write(
                f"  {b['frame_id'] or b['video_id']}: {'; '.join(b['reasons'])}\n"
            )
        return 1
    emit(
        {
            "out_dir": str(result.out_dir),
            "export_checksum": result.checksum,
            "n_videos": result.n_videos,
            "n_frames": result.n_frames,
            "omitted": [o.to_doc() for o in result.omitted],
        }
    )
    return 0


def cmd_validate(args) -> int:
    violations = validate_archive(args.archive)
    emit({"archive": str(args.archive), "violations": violations})
    return 0 if not violations else 1


def cmd_annotator_add(args) -> int:
    s = Services(args)
    annotator = s.directory.register(
        args.id, args.name or args.id, split_csv(args.roles), actor=args.actor
    )
    emit(
        {
            "annotator_id": annotator.annotator_id,
            "display_name": annotator.display_name,
            "roles": sorted(r.value for r in annotator.roles),
        }
    )
    return 0


def cmd_annotator_list(args) -> int:
    s = Services(args)
    emit(
        [
            {
                "annotator_id": a.annotator_id,
                "display_name": a.display_name,
                "roles": sorted(r.value for r in a.roles),
            }
            for a in s.directory.list()
        ]
    )
    return 0


def cmd_gate(args) -> int:
    s = Services(args)
    items = s.exporter.check_export_gate(args.project)
    emit({"ready": not items, "blockers": [i.to_doc() for i in items]})
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    store_path = args.store or os.environ.get("CVSA_STORE") or "cvsannot.db"
    tokens = args.tokens_file or os.environ.get("CVSA_TOKENS_FILE")
    frames_root = args.frames_root or os.environ.get("CVSA_FRAMES_ROOT")
    port = args.port or int(os.environ.get("CVSA_PORT", "8000"))
    app = create_app(store_path, tokens_path=tokens, frames_root=frames_root)
    uvicorn.run(app, host=args.host, port=port)
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> Parser:
    parser = Parser(prog="cvsannot", description=__doc__)
    parser.add_argument(
        "--store", default=None, help="store file (default: $CVSA_STORE or cvsannot.db)"
    )
    parser.add_argument(
        "--frames-root",
        default=None,
        help="directory holding pre-extracted frame folders",
    )
    parser.add_argument(
        "--actor", default="cli", help="identity recorded in the audit log"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="register a procedure video")
    p.add_argument("--source", required=True)
    p.add_argument("--duration-ms", type=int, required=True)
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--project", default="default")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("screen", help="record exclusion screening")
    p.add_argument("--video", required=True)
    p.add_argument(
        "--flags",
        default="",
        help="comma-separated exclusion flags; empty means the video passes",
    )
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("roi", help="region of interest")
    roi_sub = p.add_subparsers(dest="roi_command", required=True)
    p = roi_sub.add_parser("set")
    p.add_argument("--video", required=True)
    p.add_argument("--start-ms", type=int, required=True)
    p.add_argument("--end-ms", type=int, required=True)
    p.add_argument("--evaluable-ms", type=int, default=None)
    p.set_defaults(func=cmd_roi_set)

    p = sub.add_parser("sample", help="lay the keyframe grid over the ROI")
    p.add_argument("--video", required=True)
    p.add_argument("--interval-ms", type=int, default=DEFAULT_INTERVAL_MS)
    p.add_argument("--materialize", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("materialize", help="decode planned frames to disk")
    p.add_argument("--video", required=True)
    p.set_defaults(func=cmd_materialize)

    p = sub.add_parser("cvs", help="criteria assessments")
    cvs_sub = p.add_subparsers(dest="cvs_command", required=True)
    p = cvs_sub.add_parser("assign")
    p.add_argument("--target", required=True)
    p.add_argument("--raters", required=True, help="comma-separated rater ids")
    p.set_defaults(func=cmd_cvs_assign)
    p = cvs_sub.add_parser("submit")
    p.add_argument("--target", required=True)
    p.add_argument("--rater", required=True)
    p.add_argument("--c1", action=argparse.BooleanOptionalAction, required=True)
    p.add_argument("--c2", action=argparse.BooleanOptionalAction, required=True)
    p.add_argument("--c3", action=argparse.BooleanOptionalAction, required=True)
    p.add_argument("--comment", default="")
    p.set_defaults(func=cmd_cvs_submit)
    p = cvs_sub.add_parser("consensus")
    p.add_argument("--target", required=True)
    p.set_defaults(func=cmd_cvs_consensus)

    p = sub.add_parser("seg", help="polygon segmentation")
    seg_sub = p.add_subparsers(dest="seg_command", required=True)
    p = seg_sub.add_parser("submit")
    p.add_argument("--frame", default=None)
    p.add_argument("--author", required=True)
    p.add_argument("--shapes-file", required=True, help="polygon interchange JSON")
    p.add_argument("--draft", action="store_true")
    p.set_defaults(func=cmd_seg_submit)
    p = seg_sub.add_parser("review")
    p.add_argument("--record", required=True, help="segmentation id or frame id")
    p.add_argument("--reviewer", required=True)
    verdict = p.add_mutually_exclusive_group(required=True)
    verdict.add_argument("--approve", dest="approve", action="store_true")
    verdict.add_argument("--request-changes", dest="approve", action="store_false")
    p.add_argument("--comment", default="")
    p.set_defaults(func=cmd_seg_review)
    p = seg_sub.add_parser("lint")
    p.add_argument("--frame", required=True)
    p.add_argument("--prev", default=None)
    p.add_argument("--next", default=None)
    p.set_defaults(func=cmd_seg_lint)
    p = seg_sub.add_parser("mask")
    p.add_argument("--frame", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_seg_mask)

    p = sub.add_parser("qa", help="agreement and review tooling")
    qa_sub = p.add_subparsers(dest="qa_command", required=True)
    p = qa_sub.add_parser("kappa")
    p.add_argument("--scope", default="project:default")
    p.add_argument("--criterion", default="cvs", choices=["c1", "c2", "c3", "cvs"])
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_qa_kappa)
    p = qa_sub.add_parser("batch")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--project", default=None)
    p.set_defaults(func=cmd_qa_batch)
    p = qa_sub.add_parser("queue")
    p.add_argument("--video", required=True)
    p.add_argument("--reviewer", required=True)
    p.set_defaults(func=cmd_qa_queue)

    p = sub.add_parser("gate", help="list what blocks a full export")
    p.add_argument("--project", default="default")
    p.set_defaults(func=cmd_gate)

    p = sub.add_parser("export", help="write the gated dataset")
    p.add_argument("--project", default="default")
    p.add_argument("--out", required=True)
    p.add_argument("--partial", action="store_true")
    p.add_argument("--materialize-frames", action="store_true")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("validate", help="check an exported archive")
    p.add_argument("--archive", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("annotator", help="manage annotators")
    ann_sub = p.add_subparsers(dest="annotator_command", required=True)
    p = ann_sub.add_parser("add")
    p.add_argument("--id", required=True)
    p.add_argument("--name", default="")
    p.add_argument("--roles", required=True, help="comma-separated roles")
    p.set_defaults(func=cmd_annotator_add)
    p = ann_sub.add_parser("list")
    p.set_defaults(func=cmd_annotator_list)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--tokens-file", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StorageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except AnnotationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
