from dataclasses import dataclass

import pytest
from PIL import Image

from cvsannot.agreement import QaService
from cvsannot.annotators import AnnotatorDirectory
from cvsannot.assessment import AssessmentService
from cvsannot.export import DatasetExporter
from cvsannot.ingestion import FrameDirectoryDecoder, VideoRegistry
from cvsannot.sampling import RoiSampler
from cvsannot.segmentation import SegmentationService
from cvsannot.store import RecordStore


def make_frame_dir(root, name, timestamps, size=(32, 24), salt=0):
    """Build a pre-extracted frame directory: <name>/<timestamp:09d>.png with
    pixels deterministically derived from the timestamp."""
    frame_dir = root / name
    frame_dir.mkdir(parents=True, exist_ok=True)
    for ts in timestamps:
        img = Image.new("RGB", size, ((ts // 1000 + salt) % 256, salt % 256, 7))
        img.save(frame_dir / f"{ts:09d}.png")
    return frame_dir


@pytest.fixture
def store(tmp_path):
    s = RecordStore(tmp_path / "store.db")
    yield s
    s.close()


@pytest.fixture
def registry(store, tmp_path):
    return VideoRegistry(store, FrameDirectoryDecoder(tmp_path / "frames"))


@pytest.fixture
def sample_video(registry, tmp_path):
    """A registered 600s video backed by a frame dir with frames every 30s."""
    src = make_frame_dir(tmp_path, "src_a", range(0, 600_001, 30_000))
    return registry.register_video(str(src), duration_ms=600_000, fps=25.0)


@dataclass
class Pipeline:
    store: RecordStore
    registry: VideoRegistry
    sampler: RoiSampler
    directory: AnnotatorDirectory
    assessments: AssessmentService
    segmentation: SegmentationService
    qa: QaService
    exporter: DatasetExporter

    def annotate_frame(self, frame_id, labels=None, author="seg1", reviewer="rev1"):
        """Take one manual keyframe through assessments, segmentation, approval."""
        labels = labels or {"r1": (True, True, True), "r2": (True, True, False),
                            "r3": (True, True, True)}
        self.assessments.assign_raters(frame_id, sorted(labels))
        for rid, (c1, c2, c3) in labels.items():
            self.assessments.submit_assessment(frame_id, rid, c1, c2, c3)
        self.segmentation.submit_segmentation(
            frame_id,
            author,
            [
                {"label": 1, "points": [[2, 2], [14, 2], [14, 12], [2, 12]]},
                {"label": 5, "points": [[16, 4], [28, 4], [22, 18]], "draw_order": 1},
            ],
        )
        self.segmentation.review_segmentation(f"seg-{frame_id}", reviewer, approve=True)


def make_pipeline(store, registry):
    sampler = RoiSampler(store, registry)
    directory = AnnotatorDirectory(store)
    for rid in ("r1", "r2", "r3"):
        directory.register(rid, rid.upper(), ["cvs_rater"])
    directory.register("seg1", "Seg One", ["segmenter"])
    directory.register("rev1", "Rev One", ["reviewer"])
    assessments = AssessmentService(store, directory, sampler)
    segmentation = SegmentationService(store, directory, sampler)
    qa = QaService(store, sampler)
    exporter = DatasetExporter(store, sampler, assessments, segmentation)
    return Pipeline(
        store, registry, sampler, directory, assessments, segmentation, qa, exporter
    )


@pytest.fixture
def pipeline(store, registry):
    return make_pipeline(store, registry)


@pytest.fixture
def annotated_video(pipeline, sample_video):
    """sample_video taken all the way to export-ready: ROI, plan, pixels,
    three assessments per manual keyframe, approved segmentation on each."""
    vid = sample_video.video_id
    pipeline.sampler.set_roi(vid, 120_000, 480_000, 240_000)
    pipeline.sampler.sample_keyframes(vid, 30_000)
    pipeline.sampler.materialize_plan(vid)
    for ref in pipeline.sampler.get_plan(vid).manual_keyframes:
        pipeline.annotate_frame(ref.frame_id)
    return vid
