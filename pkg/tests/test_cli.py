import json
import subprocess
import sys

import numpy as np
import pytest

from wsscues import imagery
from wsscues.cli import build_parser, load_config, main
from wsscues.synthetic import make_scene, write_scene

FAST = ["--iterations", "2"]


@pytest.fixture
def scene_dir(tmp_path):
    rec = write_scene(make_scene(5), str(tmp_path), "s")
    (tmp_path / "manifest.json").write_text(json.dumps([rec]))
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_single_image_chain(scene_dir, capsys):
    d = scene_dir
    assert run("superpixel", d / "s.png", "-o", d / "sp.npy", "--overlay", d / "ov.png") == 0
    assert imagery.load_labeling(str(d / "sp.npy")).shape == (64, 64)
    assert imagery.load_image(str(d / "ov.png")).shape == (64, 64, 3)
    assert run("cues", "generate", "--activations", d / "s_cam.npy", "--features", d / "s_feat.npy",
               "--present", "1,2", "-o", d / "raw.npy") == 0
    (d / "labels.json").write_text(json.dumps({"s": [1, 2]}))
    assert run("cues", "generate", "--activations", d / "s_graycam.npy", "--features", d / "s_feat.npy",
               "--labels", d / "labels.json", "--image-id", "s", "--image", d / "s.png", "-o", d / "graw.npy") == 0
    assert run("cues", "snap", d / "raw.npy", "--superpixels", d / "sp.npy", "-o", d / "sn.npy") == 0
    assert run("cues", "snap", d / "graw.npy", "--superpixels", d / "sp.npy", "-o", d / "gsn.npy") == 0
    assert run("cues", "merge", d / "sn.npy", d / "gsn.npy", "-o", d / "mg.npy") == 0
    assert run("refine", "--image", d / "s.png", "--cues", d / "mg.npy", "-o", d / "logits.npy",
               "--trace", d / "trace.csv", "--steps", "3", "--crf-every", "2", *FAST) == 0
    assert len((d / "trace.csv").read_text().splitlines()) == 4
    capsys.readouterr()
    assert run("loss", "eval", "--logits", d / "logits.npy", "--cues", d / "mg.npy", "--image", d / "s.png", *FAST) == 0
    losses = json.loads(capsys.readouterr().out)
    assert losses["total"] == pytest.approx(losses["seeding"] + losses["boundary"])
    assert run("infer", "--image", d / "s.png", "--logits", d / "logits.npy", "--predicted", "1,2",
               "-o", d / "mask.png", *FAST) == 0
    assert imagery.load_mask_png(str(d / "mask.png")).shape == (64, 64)
    capsys.readouterr()
    assert run("eval", "--gt", d / "s_gt.png", "--pred", d / "mask.png", "--num-classes", "3", "--csv", d / "iou.csv") == 0
    table = capsys.readouterr().out
    assert table.splitlines()[-1].startswith("mIoU")
    assert (d / "iou.csv").read_text().startswith("class,iou")
    assert run("eval", "--gt", d / "s_gt.png", "--pred", d / "mg.npy", "--num-classes", "3", "--foreground-only") == 0


def test_viz_modes(scene_dir):
    d = scene_dir
    cues = np.zeros((3, 4, 4), dtype=np.uint8)
    cues[2, :2] = 1
    imagery.save_cues(cues, str(d / "c.npy"))
    assert run("viz", d / "c.npy", "-o", d / "c.png") == 0
    assert imagery.load_mask_png(str(d / "c.png"))[0, 0] == 2
    assert run("viz", d / "c.npy", "--channel", "1", "-o", d / "c1.png") == 0
    assert not imagery.load_mask_png(str(d / "c1.png")).any()
    imagery.save_labeling(np.array([[0, 0, 1, 1]] * 4), str(d / "l.npy"))
    img = np.zeros((4, 4, 3), dtype=np.uint8)
    imagery.save_image(img, str(d / "i.png"))
    assert run("viz", d / "l.npy", "--image", d / "i.png", "-o", d / "ov.png") == 0
    assert imagery.load_image(str(d / "ov.png"))[0, 1].tolist() == [255, 0, 0]
    assert run("viz", d / "s_gt.png", "-o", d / "gt_copy.png") == 0


def test_pipeline_command_and_exit_codes(scene_dir, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"refine": {"steps": 2}, "crf": {"iterations": 2}}))
    out = tmp_path / "out"
    assert run("--config", cfg, "pipeline", scene_dir / "manifest.json", "--out", out, "--jobs", "1") == 0
    assert (out / "s_mask.png").exists() and (out / "report.json").exists()

    broken = json.loads((scene_dir / "manifest.json").read_text())
    broken.append({**broken[0], "image_id": "t", "features": "missing.npy"})
    (scene_dir / "broken.json").write_text(json.dumps(broken))
    assert run("--config", cfg, "pipeline", scene_dir / "broken.json", "--out", out,
               "--stages", "superpixel,cues") == 1

    (tmp_path / "bad.json").write_text(json.dumps({"crf": {"w9": 1}}))
    assert run("--config", tmp_path / "bad.json", "pipeline", scene_dir / "manifest.json") == 2
    monkeypatch.setenv("WSSCUES_CONFIG", str(tmp_path / "bad.json"))
    assert run("pipeline", scene_dir / "manifest.json") == 2
    assert run("pipeline", scene_dir / "manifest.json", "--stages", "paint") == 2
    assert run("pipeline", tmp_path / "no_manifest.json") == 2


def test_flags_override_config_file(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"crf": {"w1": 4.0, "w2": 2.0}}))
    monkeypatch.setenv("WSSCUES_CONFIG", str(cfg))
    args = build_parser().parse_args(["refine", "--image", "x", "--cues", "y", "-o", "z", "--w1", "7", "--lr", "3"])
    c = load_config(args)
    assert c.crf.w1 == 7.0 and c.crf.w2 == 2.0 and c.refine.lr == 3.0


def test_runtime_errors_exit_one(tmp_path):
    assert run("superpixel", tmp_path / "missing.png", "-o", tmp_path / "o.npy") == 1
    assert run("eval", "--gt", "a.png", "b.png", "--pred", "a.png") == 2


def test_console_entry_point():
    done = subprocess.run([sys.executable, "-m", "wsscues.cli", "--help"], capture_output=True, text=True)
    assert done.returncode == 0 and "pipeline" in done.stdout
