"""End-to-end tests driving the command line entry point in process."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from memslidar.cli import main
from memslidar.scan_engine import ScanPattern
from memslidar.scene_io import load_scene, read_pgm16, write_pgm16


def run(*argv):
    return main([str(a) for a in argv])


def read_json(path):
    return json.loads(Path(path).read_text())


def make_scene(tmp_path, preset, frames, name="scene", **flags):
    out = tmp_path / name
    argv = ["gen-scene", "--preset", preset, "--frames", frames, "--out", out]
    for flag, value in flags.items():
        argv += ["--" + flag.replace("_", "-"), value]
    assert run(*argv) == 0
    return out


def test_version_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "memslidar" in capsys.readouterr().out


def test_optics_sweep_row_count(tmp_path):
    out = tmp_path / "sweep"
    code = run(
        "optics-sweep", "--design", "all", "--M", "1,100",
        "--w0-mm", "0.1,5", "--Z-m", "0.5:100:log50", "--out", out,
    )
    assert code == 0
    lines = (out / "sweep.csv").read_text().strip().splitlines()
    # 3 designs x 2 mirror counts x 2 waists x 50 ranges, plus header
    assert len(lines) == 601
    run_doc = read_json(out / "run.json")
    assert run_doc["command"] == "optics-sweep"
    assert run_doc["resolved"]["M"] == "1,100"
    assert "package_version" in run_doc


def test_optics_sweep_crossover_file(tmp_path):
    out = tmp_path / "xover"
    assert run("optics-sweep", "--find-crossover", "--out", out) == 0
    crossings = read_json(out / "crossovers.json")
    assert crossings
    hits = [
        c for c in crossings
        if c["winner_above"] == "single_detector" and 100 < c["z_star_m"] < 300
    ]
    assert hits


def test_optics_sweep_empty_grid_usage_error(tmp_path):
    assert run("optics-sweep", "--Z-m", "", "--out", tmp_path / "a") == 2
    assert run("optics-sweep", "--M", "", "--out", tmp_path / "b") == 2


def test_optics_sweep_out_of_bounds_exit_2(tmp_path):
    assert run("optics-sweep", "--M", "300", "--out", tmp_path / "oob") == 2


def test_fit_budget_reference_pairs(tmp_path):
    out = tmp_path / "fit"
    assert run("fit-budget", "--out", out) == 0
    doc = read_json(out / "budget_fit.json")
    assert doc["sample_rate_hz"] == pytest.approx(1527.6715945089757, rel=1e-9)
    assert doc["frame_overhead_s"] == pytest.approx(0.015495989161577512, rel=1e-9)
    assert len(doc["residuals"]) == 5
    assert [row["predicted"] for row in doc["forward"]] == [27, 39, 61, 103, 230]
    for row in doc["forward"]:
        assert abs(row["predicted"] - row["observed"]) <= 0.05 * row["observed"]


def test_fit_budget_bad_pairs_exit_2(tmp_path):
    assert run("fit-budget", "--pairs", "30,28", "--out", tmp_path / "a") == 2
    # two fps values, identical: singular system
    assert run("fit-budget", "--pairs", "10:5,10:7", "--out", tmp_path / "b") == 2


def test_gen_scene_preset_loads(tmp_path):
    out = make_scene(tmp_path, "two-plane", 3)
    scene = load_scene(out)
    assert len(scene.frames) == 3
    assert scene.frames[0].depth_gt.shape == (120, 160)
    stamps = [f.timestamp_s for f in scene.frames]
    assert stamps == sorted(stamps) and len(set(stamps)) == 3


def test_gen_scene_spec_json(tmp_path):
    spec = {
        "width": 64,
        "height": 48,
        "n_frames": 1,
        "fps": 10.0,
        "fov_deg": 25.0,
        "primitives": [
            {"kind": "plane", "z_m": 2.0, "texture": "flat", "color": [90, 90, 90]},
        ],
    }
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec))
    out = tmp_path / "scene"
    assert run("gen-scene", "--spec-json", spec_path, "--out", out) == 0
    scene = load_scene(out)
    depth = scene.frames[0].depth_gt
    assert depth.shape == (48, 64)
    assert np.all(depth == 2.0)


def test_scan_without_scene_single_pattern(tmp_path):
    out = tmp_path / "scan"
    assert run("scan", "--fps", "30", "--dims", "64x48", "--out", out) == 0
    files = sorted(out.glob("pattern_*.json"))
    assert [f.name for f in files] == ["pattern_0000.json"]
    pattern = ScanPattern.from_json(files[0].read_text())
    assert pattern.budget == 27
    assert len(pattern.samples) == 27


def test_scan_entropy_pattern_per_frame(tmp_path):
    scene = make_scene(tmp_path, "moving-box", 3)
    out = tmp_path / "scan"
    code = run(
        "scan", "--scene", scene, "--regime", "entropy",
        "--fps", "30", "--out", out,
    )
    assert code == 0
    files = sorted(out.glob("pattern_*.json"))
    assert [f.name for f in files] == [
        "pattern_0000.json", "pattern_0001.json", "pattern_0002.json",
    ]
    first = ScanPattern.from_json(files[0].read_text())
    last = ScanPattern.from_json(files[2].read_text())
    assert len(first.samples) == len(last.samples) == 27
    # box moved, so sample placement shifts between frames
    assert first.samples != last.samples


def test_scan_foveated_needs_roi(tmp_path):
    assert run(
        "scan", "--regime", "foveated", "--dims", "64x48",
        "--fps", "30", "--out", tmp_path / "scan",
    ) == 2


def test_capture_sample_budget(tmp_path):
    scene = make_scene(tmp_path, "plane", 1)
    out = tmp_path / "cap"
    assert run("capture", "--scene", scene, "--fps", "30", "--out", out) == 0
    summary = read_json(out / "capture_summary.json")
    assert len(summary) == 1
    assert summary[0]["n_samples"] == 27
    assert summary[0]["regime"] == "full_fov"
    assert summary[0]["roi"] is None
    sparse = read_pgm16(out / "0000.pgm")
    assert int(np.count_nonzero(sparse)) == 27


def test_capture_rerun_and_jobs_byte_identical(tmp_path, monkeypatch):
    for name in ("r1", "r2"):
        root = tmp_path / name
        root.mkdir()
        monkeypatch.chdir(root)
        assert run(
            "gen-scene", "--preset", "moving-box", "--frames", "3",
            "--out", "scene",
        ) == 0
        assert run(
            "capture", "--scene", "scene", "--fps", "20", "--out", "cap",
        ) == 0
    a, b = tmp_path / "r1", tmp_path / "r2"
    names = sorted(p.name for p in (a / "cap").iterdir())
    assert names == sorted(p.name for p in (b / "cap").iterdir())
    for name in names:
        assert (a / "cap" / name).read_bytes() == (b / "cap" / name).read_bytes()
    # same inputs, more workers: data files must not change
    monkeypatch.chdir(a)
    assert run(
        "capture", "--scene", "scene", "--fps", "20", "--jobs", "2",
        "--out", "cap2",
    ) == 0
    for name in names:
        if name == "run.json":
            continue
        assert (a / "cap2" / name).read_bytes() == (a / "cap" / name).read_bytes()


def test_complete_fills_every_pixel(tmp_path):
    scene = make_scene(tmp_path, "plane", 1)
    cap = tmp_path / "cap"
    assert run("capture", "--scene", scene, "--fps", "30", "--out", cap) == 0
    pred = tmp_path / "pred"
    assert run(
        "complete", "--sparse", cap, "--scene", scene, "--out", pred,
    ) == 0
    dense = read_pgm16(pred / "0000.pgm")
    assert dense.shape == (120, 160)
    assert np.all(dense > 0)


def _captured_completed(tmp_path, preset="plane", frames="2", fps="10"):
    scene = make_scene(tmp_path, preset, frames)
    cap = tmp_path / "cap"
    assert run("capture", "--scene", scene, "--fps", fps, "--out", cap) == 0
    pred = tmp_path / "pred"
    assert run("complete", "--sparse", cap, "--scene", scene, "--out", pred) == 0
    return scene, cap, pred


def test_eval_row_layout_and_roi(tmp_path):
    scene, _, pred = _captured_completed(tmp_path)
    out = tmp_path / "eval"
    assert run("eval", "--pred", pred, "--scene", scene, "--out", out) == 0
    lines = (out / "metrics.csv").read_text().strip().splitlines()
    # header, one row per frame, pooled "all" row
    assert len(lines) == 4
    assert lines[0].startswith("frame,")
    assert lines[-1].startswith("all,")
    per_frame = lines[1].split(",")
    assert int(per_frame[-1]) == 160 * 120

    roi_out = tmp_path / "eval_roi"
    assert run(
        "eval", "--pred", pred, "--scene", scene,
        "--roi", "10,10,50,40", "--out", roi_out,
    ) == 0
    rows = (roi_out / "metrics.csv").read_text().strip().splitlines()
    assert int(rows[1].split(",")[-1]) == 40 * 30


def test_eval_roi_only_uses_capture_trace(tmp_path):
    scene = make_scene(tmp_path, "plane", 2)
    cap = tmp_path / "cap"
    assert run(
        "capture", "--scene", scene, "--regime", "foveated",
        "--roi", "20,30,90,80", "--fps", "10", "--out", cap,
    ) == 0
    pred = tmp_path / "pred"
    assert run("complete", "--sparse", cap, "--scene", scene, "--out", pred) == 0
    out = tmp_path / "eval"
    assert run(
        "eval", "--pred", pred, "--scene", scene, "--roi-only", "--out", out,
    ) == 0
    lines = (out / "metrics.csv").read_text().strip().splitlines()
    for row in lines[1:-1]:
        assert int(row.split(",")[-1]) == 70 * 50
    # the two restrictions conflict
    assert run(
        "eval", "--pred", pred, "--scene", scene, "--roi-only",
        "--roi", "0,0,10,10", "--out", tmp_path / "both",
    ) == 2


def test_capture_auto_motion_roi_trace(tmp_path):
    scene = make_scene(tmp_path, "moving-box", 4)
    cap = tmp_path / "cap"
    assert run(
        "capture", "--scene", scene, "--regime", "foveated",
        "--roi", "auto-motion", "--fps", "20", "--out", cap,
    ) == 0
    summary = read_json(cap / "capture_summary.json")
    assert len(summary) == 4
    # nothing to diff against on the first frame
    assert summary[0]["regime"] == "full_fov"
    assert summary[0]["roi"] is None
    movers = [row for row in summary[1:] if row["regime"] == "foveated_roi"]
    assert movers
    for row in movers:
        x0, y0, x1, y1 = row["roi"]
        assert 0 <= x0 < x1 <= 160 and 0 <= y0 < y1 <= 120


def test_eval_missing_pred_exit_3(tmp_path):
    scene = make_scene(tmp_path, "plane", 1)
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run(
        "eval", "--pred", empty, "--scene", scene, "--out", tmp_path / "e",
    ) == 3


def test_eval_dimension_mismatch_exit_3(tmp_path):
    scene = make_scene(tmp_path, "plane", 1)
    pred = tmp_path / "pred"
    pred.mkdir()
    write_pgm16(pred / "0000.pgm", np.ones((8, 8), dtype=np.uint16))
    assert run(
        "eval", "--pred", pred, "--scene", scene, "--out", tmp_path / "e",
    ) == 3


def test_fovea_motion_trace(tmp_path):
    scene = make_scene(tmp_path, "moving-box", 4)
    out = tmp_path / "fovea"
    assert run("fovea", "--scene", scene, "--mode", "motion", "--out", out) == 0
    lines = (out / "roi_trace.csv").read_text().strip().splitlines()
    assert lines[0] == "frame,x0,y0,x1,y1,area_px"
    assert len(lines) == 5
    assert lines[1].split(",")[1:] == ["", "", "", "", ""]
    tail = [line.split(",") for line in lines[2:]]
    assert all(row[1] != "" for row in tail)
    areas = [int(row[5]) for row in tail]
    assert all(a >= 100 for a in areas)


def test_fovea_entropy_trace(tmp_path):
    scene = make_scene(tmp_path, "textured", 2)
    out = tmp_path / "fovea"
    code = run(
        "fovea", "--scene", scene, "--mode", "entropy",
        "--roi-dims", "40x30", "--out", out,
    )
    assert code == 0
    lines = (out / "roi_trace.csv").read_text().strip().splitlines()
    assert len(lines) == 3
    for line in lines[1:]:
        frame, x0, y0, x1, y1, area = line.split(",")
        assert int(x1) - int(x0) == 40
        assert int(y1) - int(y0) == 30
        assert int(area) == 1200


def test_eval_fps_sweep(tmp_path):
    scene, _, pred = _captured_completed(tmp_path, frames="1")
    out = tmp_path / "sweep"
    assert run(
        "eval", "--pred", pred, "--scene", scene,
        "--fps-sweep", "30,6", "--out", out,
    ) == 0
    lines = (out / "fps_sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 3
    assert lines[1].startswith("30,27,")
    assert lines[2].startswith("6,230,")


def test_capture_bad_roi_exit_2(tmp_path):
    scene = make_scene(tmp_path, "plane", 1)
    assert run(
        "capture", "--scene", scene, "--regime", "foveated",
        "--roi", "5,5,2,2", "--fps", "10", "--out", tmp_path / "cap",
    ) == 2


def test_unknown_scene_dir_exit_3(tmp_path):
    assert run(
        "scan", "--scene", tmp_path / "nope", "--fps", "30",
        "--out", tmp_path / "scan",
    ) == 3


def test_run_json_records_resolved_args(tmp_path):
    out = make_scene(tmp_path, "plane", 2)
    doc = read_json(out / "run.json")
    assert doc["command"] == "gen-scene"
    assert doc["resolved"]["seed"] == 0
    assert doc["resolved"]["frames"] == 2
    assert list(doc["resolved"]) == sorted(doc["resolved"])
