"""CLI behavior: full pipeline, exit codes, report files, env var handling."""

import json
import subprocess
import sys

import pytest

from cvsannot.cli import main

from conftest import make_frame_dir


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


@pytest.fixture
def env(tmp_path):
    frames = make_frame_dir(tmp_path, "clip", range(0, 600_001, 30_000))
    return {"store": tmp_path / "cli.db", "frames": frames, "tmp": tmp_path}


def base(env):
    return ["--store", env["store"]]


def ingest(capsys, env):
    doc = run_json(
        capsys,
        *base(env),
        "ingest",
        "--source", env["frames"],
        "--duration-ms", 600_000,
        "--fps", 25,
    )
    return doc["video_id"]


def test_full_pipeline(capsys, env):
    vid = ingest(capsys, env)

    doc = run_json(capsys, *base(env), "screen", "--video", vid, "--flags", "")
    assert doc["status"] == "roi_pending"

    doc = run_json(
        capsys, *base(env), "roi", "set", "--video", vid,
        "--start-ms", 120_000, "--end-ms", 480_000, "--evaluable-ms", 240_000,
    )
    assert doc["t_evaluable_ms"] == 240_000

    plan = run_json(
        capsys, *base(env), "sample", "--video", vid,
        "--interval-ms", 30_000, "--materialize",
    )
    assert len(plan["manual_timestamps"]) == 9
    assert plan["materialized"] is True

    for rid in ("r1", "r2", "r3"):
        run_json(
            capsys, *base(env), "annotator", "add",
            "--id", rid, "--roles", "cvs_rater",
        )
    run_json(
        capsys, *base(env), "annotator", "add",
        "--id", "seg1", "--roles", "segmenter",
    )
    run_json(
        capsys, *base(env), "annotator", "add",
        "--id", "rev1", "--roles", "reviewer",
    )

    shapes_path = env["tmp"] / "shapes.json"
    frame_ids = [f"{vid}-{ts:09d}" for ts in plan["manual_timestamps"]]
    for frame_id in frame_ids:
        run_json(
            capsys, *base(env), "cvs", "assign",
            "--target", frame_id, "--raters", "r1,r2,r3",
        )
        for rid, c3 in (("r1", "--c3"), ("r2", "--c3"), ("r3", "--no-c3")):
            doc = run_json(
                capsys, *base(env), "cvs", "submit",
                "--target", frame_id, "--rater", rid, "--c1", "--c2", c3,
            )
            assert doc["rater_id"] == rid
        shapes_path.write_text(
            json.dumps(
                {
                    "frame_id": frame_id,
                    "shapes": [
                        {"label": "gallbladder",
                         "points": [[2, 2], [14, 2], [14, 12], [2, 12]]}
                    ],
                }
            )
        )
        run_json(
            capsys, *base(env), "seg", "submit",
            "--author", "seg1", "--shapes-file", shapes_path,
        )
        run_json(
            capsys, *base(env), "seg", "review",
            "--record", f"seg-{frame_id}", "--reviewer", "rev1", "--approve",
        )

    consensus = run_json(
        capsys, *base(env), "cvs", "consensus", "--target", frame_ids[0]
    )
    assert consensus == {
        "target_id": frame_ids[0],
        "c1": True, "c2": True, "c3": True, "cvs": True,
        "n_raters": 3, "source": "voted",
    }

    gate = run_json(capsys, *base(env), "gate")
    assert gate["ready"] is True

    out_dir = env["tmp"] / "dataset"
    result = run_json(capsys, *base(env), "export", "--out", out_dir)
    assert result["n_frames"] == 13
    assert (out_dir / "manifest.json").is_file()

    doc = run_json(capsys, *base(env), "validate", "--archive", out_dir)
    assert doc["violations"] == []

    mask_out = env["tmp"] / "m.png"
    doc = run_json(
        capsys, *base(env), "seg", "mask", "--frame", frame_ids[0], "--out", mask_out
    )
    assert doc["shape"] == [24, 32]
    assert mask_out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    # consensus says the triangle is cleared but only a gallbladder polygon
    # exists, so the advisory fires
    lint = run_json(capsys, *base(env), "seg", "lint", "--frame", frame_ids[0])
    assert [f["code"] for f in lint["findings"]] == ["c2-without-triangle-class"]

    queue = run_json(
        capsys, *base(env), "qa", "queue", "--video", vid, "--reviewer", "rev1"
    )
    assert len(queue) == 9


def test_domain_error_exits_1(capsys, env):
    vid = ingest(capsys, env)
    code, out, err = run(
        capsys, *base(env), "roi", "set", "--video", vid,
        "--start-ms", 9000, "--end-ms", 9000,
    )
    assert code == 1
    assert "error:" in err and "precede" in err


def test_usage_error_exits_1(capsys, env):
    with pytest.raises(SystemExit) as exc:
        main(["--store", str(env["store"]), "roi", "set", "--video", "v0"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 1


def test_missing_shapes_file_exits_2(capsys, env):
    vid = ingest(capsys, env)
    code, out, err = run(
        capsys, *base(env), "seg", "submit",
        "--frame", f"{vid}-000000000", "--author", "a",
        "--shapes-file", env["tmp"] / "nope.json",
    )
    assert code == 2


def test_blocked_export_exits_1_with_blockers(capsys, env):
    vid = ingest(capsys, env)
    run_json(
        capsys, *base(env), "roi", "set", "--video", vid,
        "--start-ms", 0, "--end-ms", 60_000,
    )
    run_json(capsys, *base(env), "sample", "--video", vid, "--materialize")
    code, out, err = run(
        capsys, *base(env), "export", "--out", env["tmp"] / "never"
    )
    assert code == 1
    assert "blocked" in err
    assert f"{vid}-000000000" in err
    assert not (env["tmp"] / "never").exists()


def test_qa_kappa_table_and_files(capsys, env, tmp_path):
    vid = ingest(capsys, env)
    run_json(
        capsys, *base(env), "roi", "set", "--video", vid,
        "--start-ms", 0, "--end-ms", 90_000,
    )
    run_json(
        capsys, *base(env), "sample", "--video", vid,
        "--interval-ms", 30_000, "--materialize",
    )
    for rid in ("r1", "r2", "r3"):
        run_json(
            capsys, *base(env), "annotator", "add",
            "--id", rid, "--roles", "cvs_rater",
        )
    for ts in (0, 30_000, 60_000, 90_000):
        frame = f"{vid}-{ts:09d}"
        run_json(
            capsys, *base(env), "cvs", "assign",
            "--target", frame, "--raters", "r1,r2,r3",
        )
        for rid in ("r1", "r2", "r3"):
            c1 = "--c1" if (ts > 0) == (rid != "r3") else "--no-c1"
            run_json(
                capsys, *base(env), "cvs", "submit",
                "--target", frame, "--rater", rid, c1, "--c2", "--no-c3",
            )
    out_dir = tmp_path / "report"
    code, out, err = run(
        capsys, *base(env), "qa", "kappa",
        "--scope", f"video:{vid}", "--criterion", "c1", "--out-dir", out_dir,
    )
    assert code == 0
    assert "r1" in out and "mean kappa" in out
    assert (out_dir / "kappa_c1.csv").is_file()
    assert (out_dir / "kappa_c1.json").is_file()
    assert (out_dir / "kappa_c1.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_qa_batch_cli_anonymous(capsys, env):
    vid = ingest(capsys, env)
    run_json(
        capsys, *base(env), "roi", "set", "--video", vid,
        "--start-ms", 0, "--end-ms", 60_000,
    )
    run_json(capsys, *base(env), "sample", "--video", vid, "--materialize")
    for rid in ("r1", "r2", "r3"):
        run_json(
            capsys, *base(env), "annotator", "add",
            "--id", rid, "--roles", "cvs_rater",
        )
    frame = f"{vid}-000000000"
    run_json(
        capsys, *base(env), "cvs", "assign", "--target", frame, "--raters", "r1,r2,r3"
    )
    for rid in ("r1", "r2", "r3"):
        run_json(
            capsys, *base(env), "cvs", "submit",
            "--target", frame, "--rater", rid, "--c1", "--no-c2", "--no-c3",
        )
    code, out, err = run(
        capsys, *base(env), "qa", "batch", "--size", 2, "--seed", 3
    )
    assert code == 0
    batch = json.loads(out)
    assert "sources" not in batch
    assert "r1" not in json.dumps(batch["items"])


def test_validate_tampered_archive_exits_1(capsys, env, pipeline, annotated_video, tmp_path):
    pipeline.exporter.export_dataset("default", tmp_path / "arch")
    manifest = tmp_path / "arch" / "manifest.json"
    doc = json.loads(manifest.read_text())
    doc["frames"][0]["cvs"]["consensus"]["c1"] = True
    manifest.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    code, out, err = run(capsys, "validate", "--archive", tmp_path / "arch")
    assert code == 1
    codes = {v["code"] for v in json.loads(out)["violations"]}
    assert "checksum-mismatch" in codes


def test_store_env_var(capsys, env, monkeypatch):
    monkeypatch.setenv("CVSA_STORE", str(env["store"]))
    doc = run_json(
        capsys, "ingest",
        "--source", env["frames"], "--duration-ms", 600_000, "--fps", 25,
    )
    assert env["store"].exists()
    doc2 = run_json(capsys, *base(env), "annotator", "list")
    assert doc2 == []


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "cvsannot", "--help"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "ingest" in proc.stdout and "export" in proc.stdout
