import pytest

from cvsannot.errors import (
    ConflictError,
    DecodeError,
    ValidationError,
    WorkflowStateError,
)
from cvsannot.ingestion import (
    ExclusionFlag,
    FrameDirectoryDecoder,
    VideoRegistry,
    VideoStatus,
    checksum_source,
    format_frame_id,
    split_frame_id,
)

from conftest import make_frame_dir


def test_register_echoes_metadata(registry, tmp_path):
    src = make_frame_dir(tmp_path, "vid30", [0, 30_000])
    video = registry.register_video(str(src), duration_ms=1_800_000, fps=25.0)
    assert video.status is VideoStatus.REGISTERED
    assert video.duration_ms == 1_800_000
    assert video.exclusion_flags == set()
    assert video.checksum == checksum_source(str(src))


def test_register_same_file_twice_rejected(registry, tmp_path):
    src = make_frame_dir(tmp_path, "dup", [0])
    registry.register_video(str(src), duration_ms=10_000, fps=25.0)
    with pytest.raises(ConflictError):
        registry.register_video(str(src), duration_ms=10_000, fps=25.0)


def test_register_zero_duration_rejected(registry, tmp_path):
    src = make_frame_dir(tmp_path, "zed", [0])
    with pytest.raises(ValidationError):
        registry.register_video(str(src), duration_ms=0, fps=25.0)


def test_register_unreadable_source(registry, tmp_path):
    with pytest.raises(ValidationError):
        registry.register_video(str(tmp_path / "missing"), duration_ms=10, fps=25.0)


def test_checksum_stable_across_rereads(tmp_path):
    src = make_frame_dir(tmp_path, "stable", [0, 1000])
    assert checksum_source(str(src)) == checksum_source(str(src))


def test_checksum_distinguishes_content(tmp_path):
    a = make_frame_dir(tmp_path, "ca", [0], salt=1)
    b = make_frame_dir(tmp_path, "cb", [0], salt=2)
    assert checksum_source(str(a)) != checksum_source(str(b))


def test_screen_with_flag_excludes(registry, sample_video):
    video = registry.screen_video(
        sample_video.video_id, {ExclusionFlag.INTRAOPERATIVE_CHOLANGIOGRAM}
    )
    assert video.status is VideoStatus.EXCLUDED
    assert video.exclusion_flags == {ExclusionFlag.INTRAOPERATIVE_CHOLANGIOGRAM}


def test_screen_clean_moves_to_roi_pending(registry, sample_video):
    video = registry.screen_video(sample_video.video_id, set())
    assert video.status is VideoStatus.ROI_PENDING
    assert video.exclusion_flags == set()


def test_screen_stores_multiple_flags(registry, sample_video):
    flags = {ExclusionFlag.FUNDUS_FIRST, ExclusionFlag.CONVERSION_TO_OPEN}
    video = registry.screen_video(sample_video.video_id, flags)
    assert video.status is VideoStatus.EXCLUDED
    assert video.exclusion_flags == flags


def test_screen_is_idempotent(registry, sample_video):
    flags = {ExclusionFlag.PROCEDURE_ABORTED}
    first = registry.screen_video(sample_video.video_id, flags)
    second = registry.screen_video(sample_video.video_id, flags)
    assert first.status == second.status
    assert first.exclusion_flags == second.exclusion_flags


def test_rescreen_can_unexclude(registry, sample_video):
    registry.screen_video(sample_video.video_id, {ExclusionFlag.FUNDUS_FIRST})
    video = registry.screen_video(sample_video.video_id, set())
    assert video.status is VideoStatus.ROI_PENDING


def test_excluded_iff_flags_nonempty(registry, sample_video):
    for flags in (set(), {ExclusionFlag.SUBTOTAL_OR_PARTIAL}, set()):
        video = registry.screen_video(sample_video.video_id, flags)
        assert (video.status is VideoStatus.EXCLUDED) == bool(flags)
        assert bool(video.exclusion_flags) == bool(flags)


def test_exactly_five_exclusion_flags():
    assert len(ExclusionFlag) == 5


def test_screen_rejects_unknown_flag(registry, sample_video):
    with pytest.raises(ValidationError, match="unknown exclusion flag"):
        registry.screen_video(sample_video.video_id, {"not_a_flag"})
    assert registry.get_video(sample_video.video_id).exclusion_flags == set()


def test_decode_first_and_last_frame(registry, sample_video):
    first = registry.decode_frame(sample_video.video_id, 0)
    assert first.timestamp_ms == 0
    assert first.source_timestamp_ms == 0
    last = registry.decode_frame(sample_video.video_id, 600_000)
    assert last.source_timestamp_ms == 600_000


def test_decode_out_of_range(registry, sample_video):
    with pytest.raises(ValidationError):
        registry.decode_frame(sample_video.video_id, 600_001)
    with pytest.raises(ValidationError):
        registry.decode_frame(sample_video.video_id, -1)


def test_decode_excluded_video_rejected(registry, sample_video):
    registry.screen_video(sample_video.video_id, {ExclusionFlag.FUNDUS_FIRST})
    with pytest.raises(WorkflowStateError):
        registry.decode_frame(sample_video.video_id, 0)


def test_decode_nearest_tie_resolves_earlier(registry, sample_video):
    # frames every 30s; 45s is exactly between 30s and 60s
    frame = registry.decode_frame(sample_video.video_id, 45_000)
    assert frame.source_timestamp_ms == 30_000
    assert frame.timestamp_ms == 45_000


def test_decode_is_deterministic(registry, sample_video):
    a = registry.decode_frame(sample_video.video_id, 90_000)
    b = registry.decode_frame(sample_video.video_id, 90_000)
    assert a == b
    with open(a.pixel_data_ref, "rb") as fh_a, open(b.pixel_data_ref, "rb") as fh_b:
        assert fh_a.read() == fh_b.read()


def test_decoder_error_on_empty_dir(store, tmp_path):
    src = make_frame_dir(tmp_path, "full", [0])
    registry = VideoRegistry(store, FrameDirectoryDecoder(tmp_path / "frames"))
    video = registry.register_video(str(src), duration_ms=10_000, fps=25.0)
    for png in (tmp_path / "full").glob("*.png"):
        png.unlink()
    with pytest.raises(DecodeError):
        registry.decode_frame(video.video_id, 0)


def test_frame_id_round_trip():
    fid = format_frame_id("vabc", 42)
    assert fid == "vabc-000000042"
    assert split_frame_id(fid) == ("vabc", 42)
