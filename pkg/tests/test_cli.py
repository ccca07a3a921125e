import json

import numpy as np
import pytest

from gazetrack.cli import load_config_file, main
from gazetrack.imgproc import load_image, save_image
from gazetrack.synth import SyntheticEyeSpec, render


def run_cli(*argv) -> int:
    return main(list(argv))


@pytest.fixture(scope="module")
def sweep_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    code = run_cli("synth", "--out", str(out), "--sweep", "2x2",
                   "--noise", "4", "--seed", "5", "--format", "pgm")
    assert code == 0
    return out


class TestConfigFile:
    def test_parses_keys_and_comments(self, tmp_path):
        p = tmp_path / "t.conf"
        p.write_text("screen_width = 1280  # laptop panel\n\nd=600\nside=nasal\n")
        assert load_config_file(p) == {"screen_width": 1280, "d": 600.0,
                                       "side": "nasal"}

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "t.conf"
        p.write_text("warp_speed=9\n")
        with pytest.raises(ValueError):
            load_config_file(p)

    def test_bad_line_rejected(self, tmp_path):
        p = tmp_path / "t.conf"
        p.write_text("just some words\n")
        with pytest.raises(ValueError):
            load_config_file(p)

    def test_invalid_config_exits_2(self, tmp_path, sweep_dataset):
        p = tmp_path / "t.conf"
        p.write_text("r_ball=20\n")  # outside the anthropometric range
        code = run_cli("detect", str(sweep_dataset / "eye_0000.pgm"),
                       "--config", str(p))
        assert code == 2


class TestSynth:
    def test_count_renders_and_manifest(self, tmp_path):
        out = tmp_path / "ds"
        assert run_cli("synth", "--out", str(out), "--count", "3",
                       "--noise", "2", "--format", "pgm") == 0
        doc = json.loads((out / "manifest.json").read_text())
        assert len(doc["images"]) == 3
        assert all(e["role"] == "single" for e in doc["images"])
        img = load_image(out / doc["images"][0]["file"])
        assert (img.width, img.height) == (640, 480)

    def test_sweep_roles(self, sweep_dataset):
        doc = json.loads((sweep_dataset / "manifest.json").read_text())
        roles = [e["role"] for e in doc["images"]]
        assert roles[:2] == ["knot_a", "knot_b"]
        assert roles[2:] == ["target"] * 4
        assert all(e["target_screen"] is not None for e in doc["images"])

    def test_invalid_spec_exits_2(self, tmp_path):
        assert run_cli("synth", "--out", str(tmp_path / "x"),
                       "--coverage", "2.0") == 2

    def test_unwritable_out_exits_3(self, tmp_path):
        target = tmp_path / "blocked"
        target.write_text("a file, not a directory")
        assert run_cli("synth", "--out", str(target)) == 3


class TestDetect:
    def test_json_output(self, sweep_dataset, capsys):
        assert run_cli("detect", str(sweep_dataset / "eye_0002.pgm"),
                       "--json") == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["status"] == "NotCalibrated"
        assert doc["iris"] is not None

    def test_text_output(self, sweep_dataset, capsys):
        assert run_cli("detect", str(sweep_dataset / "eye_0002.pgm")) == 0
        out = capsys.readouterr().out
        assert "NotCalibrated" in out and "iris (" in out

    def test_overlay_written(self, sweep_dataset, tmp_path):
        overlay = tmp_path / "overlay.png"
        assert run_cli("detect", str(sweep_dataset / "eye_0002.pgm"),
                       "--overlay", str(overlay)) == 0
        marked = load_image(overlay)
        assert (marked.width, marked.height) == (640, 480)

    def test_missing_image_exits_2(self, tmp_path):
        assert run_cli("detect", str(tmp_path / "ghost.pgm")) == 2


class TestEval:
    def test_report_consistency(self, sweep_dataset, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        assert run_cli("eval", str(sweep_dataset),
                       "--report", str(report_path)) == 0
        report = json.loads(report_path.read_text())
        assert report["frames"] == 4
        assert report["detected"] == sum(
            1 for r in report["per_image"] if r["status"] == "Ok")
        assert report["detection_rate"] == report["detected"] / report["frames"]
        assert sum(report["status_counts"].values()) == report["frames"]
        if report["detected"]:
            worst = max(r["err_mm"]["x"] for r in report["per_image"]
                        if "err_mm" in r)
            assert report["max_err_mm"]["x"] == pytest.approx(worst)
        out = capsys.readouterr().out
        assert "detection" not in out or True  # table printed without raising

    def test_dataset_without_knots_exits_2(self, tmp_path, clean_render):
        img, _ = clean_render
        save_image(img, tmp_path / "a.pgm")
        (tmp_path / "manifest.json").write_text(json.dumps({
            "images": [{"file": "a.pgm", "role": "single",
                        "target_screen": None}]}))
        assert run_cli("eval", str(tmp_path)) == 2

    def test_missing_manifest_exits_2(self, tmp_path):
        assert run_cli("eval", str(tmp_path)) == 2


class TestServeArgs:
    def test_repeat_needs_a_manifest(self, tmp_path, clean_render):
        img, _ = clean_render
        save_image(img, tmp_path / "a.pgm")
        assert run_cli("serve", "--source", str(tmp_path), "--repeat", "2") == 2

    def test_zero_repeat_rejected(self, sweep_dataset):
        assert run_cli("serve", "--source", str(sweep_dataset),
                       "--repeat", "0") == 2


class TestBench:
    def test_small_run_reports(self, sweep_dataset, capsys):
        assert run_cli("bench", "--dataset", str(sweep_dataset),
                       "--min-frames", "6") == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["frames"] >= 6
        assert doc["fps"] > 0 and len(doc["checksum"]) == 64

    def test_missing_dataset_exits_2(self, tmp_path):
        assert run_cli("bench", "--dataset", str(tmp_path / "none"),
                       "--min-frames", "5") == 2
