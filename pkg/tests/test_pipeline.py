import json
import os

import numpy as np
import pytest

from wsscues import imagery
from wsscues.config import PipelineConfig, load_manifest
from wsscues.pipeline import STAGES, run_pipeline
from wsscues.synthetic import NUM_CLASSES, PRESENT, make_scene, write_dataset


def quick_config(out_dir):
    return PipelineConfig.from_dict({
        "crf": {"iterations": 3},
        "refine": {"steps": 4, "crf_every": 2},
        "io": {"output_dir": str(out_dir)},
    })


@pytest.fixture
def dataset(tmp_path):
    return write_dataset(tmp_path / "data", seeds=[0, 1])


def _files(out_dir):
    return {name: (out_dir / name).read_bytes() for name in sorted(os.listdir(out_dir))}


def test_scene_contract():
    s = make_scene(3)
    assert s.image.shape == (64, 64, 3) and s.image.dtype == np.uint8
    assert set(np.unique(s.gt)) == {0, *PRESENT}
    assert s.activations.shape == (NUM_CLASSES, 64, 64)
    assert np.array_equal(make_scene(3).image, s.image)


def test_empty_manifest(tmp_path):
    report, code = run_pipeline([], quick_config(tmp_path), out_dir=str(tmp_path))
    assert code == 0 and report["images"] == {} and report["failed"] == []


def test_full_run_writes_every_artifact(dataset, tmp_path):
    out = tmp_path / "out"
    report, code = run_pipeline(load_manifest(dataset), quick_config(out))
    assert code == 0
    for image_id in ("scene000", "scene001"):
        for suffix in ("superpixel.npy", "cues_raw.npy", "cues_gray_raw.npy", "cues_snapped.npy",
                       "cues_gray_snapped.npy", "cues_merged.npy", "logits.npy", "mask.png", "loss.csv"):
            assert (out / f"{image_id}_{suffix}").exists()
    assert report["eval"]["mask"]["num_images"] == 2
    stored = json.loads((out / "report.json").read_text())
    assert stored["eval"]["cues_merged"]["miou"] == report["eval"]["cues_merged"]["miou"]


def test_fault_isolation(dataset, tmp_path):
    records = load_manifest(dataset)
    records[0].activations = str(tmp_path / "nowhere.npy")
    report, code = run_pipeline(records, quick_config(tmp_path / "out"))
    assert code == 1
    assert report["failed"] == ["scene000"]
    assert report["images"]["scene001"]["status"] == "ok"
    assert "FileNotFoundError" in report["images"]["scene000"]["error"]


def test_rerun_is_byte_identical(dataset, tmp_path):
    recs = load_manifest(dataset)
    run_pipeline(recs, quick_config(tmp_path / "a"))
    run_pipeline(recs, quick_config(tmp_path / "b"), jobs=2)
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_stages_resume_from_disk(dataset, tmp_path):
    recs = load_manifest(dataset)
    run_pipeline(recs, quick_config(tmp_path / "full"))
    staged = quick_config(tmp_path / "staged")
    for stage in STAGES:
        _, code = run_pipeline(recs, staged, [stage])
        assert code == 0
    full, part = _files(tmp_path / "full"), _files(tmp_path / "staged")
    full.pop("report.json")
    part.pop("report.json")
    assert full == part


def test_stage_orderings_tolerate_skips(dataset, tmp_path):
    recs = load_manifest(dataset)
    cfg = quick_config(tmp_path / "skip")
    _, code = run_pipeline(recs, cfg, ["cues", "refine", "infer", "eval"])
    assert code == 0
    mask = imagery.load_mask_png(str(tmp_path / "skip" / "scene000_mask.png"))
    assert mask.shape == (64, 64)


def test_missing_prerequisite_fails_image(dataset, tmp_path):
    report, code = run_pipeline(load_manifest(dataset), quick_config(tmp_path / "o"), ["snap"])
    assert code == 1 and len(report["failed"]) == 2


def test_unknown_stage(tmp_path):
    with pytest.raises(ValueError):
        run_pipeline([], quick_config(tmp_path), ["train"])
