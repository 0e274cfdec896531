"""Manifest-driven batch pipeline.

Stages run in the order given, per image, and every intermediate result is
written to ``<output_dir>/<image_id>_<suffix>``.  A stage whose inputs
were produced by an earlier run is served from those files, so any
subset of stages can be re-run.
"""
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import imagery
from .cues import generate_cues, merge_cues, snap_to_superpixels
from .errors import DTypeError, ShapeError, WssError
from .imagery import IGNORE
from .inference import AmendSpec, predict_mask
from .metrics import ConfusionMatrix, class_names, cues_to_mask, iou_per_class, miou
from .objective import refine_logits, softmax, write_trace_csv
from .superpixel import segment_felzenszwalb

log = logging.getLogger(__name__)

STAGES = ("superpixel", "cues", "snap", "merge", "refine", "infer", "eval")
CUE_STAGES = ("cues_raw", "cues_snapped", "cues_merged")

_ARTIFACTS = {
    "superpixel": ("superpixel.npy", imagery.save_labeling, imagery.load_labeling),
    "cues_raw": ("cues_raw.npy", imagery.save_cues, imagery.load_cues),
    "cues_gray_raw": ("cues_gray_raw.npy", imagery.save_cues, imagery.load_cues),
    "cues_snapped": ("cues_snapped.npy", imagery.save_cues, imagery.load_cues),
    "cues_gray_snapped": ("cues_gray_snapped.npy", imagery.save_cues, imagery.load_cues),
    "cues_merged": ("cues_merged.npy", imagery.save_cues, imagery.load_cues),
    "logits": ("logits.npy", imagery.save_scoremap, imagery.load_scoremap),
    "mask": ("mask.png", imagery.save_mask_png, imagery.load_mask_png),
}


def artifact_path(out_dir, image_id, key):
    return os.path.join(out_dir, f"{image_id}_{_ARTIFACTS[key][0]}")


def load_feature_map(path):
    arr = np.load(path, allow_pickle=False)
    if arr.ndim not in (2, 3):
        raise ShapeError(f"{path}: feature map must be (H, W) or (C, H, W)")
    if not np.issubdtype(arr.dtype, np.floating):
        raise DTypeError(f"{path}: feature map must be real-valued")
    return arr


def _fit(scores, hw):
    """Resize a (K, h, w) map to the image size when they differ."""
    if scores.shape[-2:] == tuple(hw):
        return scores
    return imagery.resize_bilinear(scores, *hw)


class _Image:
    """Lazily loaded per-image state backed by the output directory."""

    def __init__(self, record, out_dir):
        self.record = record
        self.out_dir = out_dir
        self.cache = {}
        self.outputs = {}
        self._img = None

    @property
    def img(self):
        if self._img is None:
            self._img = imagery.load_image(self.record.image)
        return self._img

    def put(self, key, value):
        path = artifact_path(self.out_dir, self.record.image_id, key)
        _ARTIFACTS[key][1](value, path)
        self.cache[key] = value
        self.outputs[key] = os.path.basename(path)

    def get(self, key, required=True):
        if key not in self.cache:
            path = artifact_path(self.out_dir, self.record.image_id, key)
            if os.path.exists(path):
                self.cache[key] = _ARTIFACTS[key][2](path)
            elif required:
                raise FileNotFoundError(f"missing input for this stage: {path}")
            else:
                return None
        return self.cache[key]

    def first(self, *keys):
        for key in keys:
            value = self.get(key, required=False)
            if value is not None:
                return value
        raise FileNotFoundError(f"none of {keys} available for {self.record.image_id}")


def _stage_superpixel(st, cfg):
    st.put("superpixel", segment_felzenszwalb(st.img, cfg.felzenszwalb))


def _cue_set(st, cfg, act_path, feat_path):
    hw = st.img.shape[:2]
    act = _fit(imagery.load_scoremap(act_path), hw)
    feats = load_feature_map(feat_path)
    feats = _fit(feats if feats.ndim == 3 else feats[None], hw)
    return generate_cues(act, feats, st.record.present, cfg.thresholds)


def _stage_cues(st, cfg):
    rec = st.record
    st.put("cues_raw", _cue_set(st, cfg, rec.activations, rec.features))
    if rec.gray_activations:
        st.put("cues_gray_raw", _cue_set(st, cfg, rec.gray_activations, rec.gray_features or rec.features))


def _stage_snap(st, cfg):
    sp = st.get("superpixel")
    st.put("cues_snapped", snap_to_superpixels(st.get("cues_raw"), sp, cfg.thresholds))
    gray = st.get("cues_gray_raw", required=False)
    if gray is not None:
        st.put("cues_gray_snapped", snap_to_superpixels(gray, sp, cfg.thresholds))


def _stage_merge(st, cfg):
    color = st.first("cues_snapped", "cues_raw")
    gray = st.get("cues_gray_snapped", required=False)
    if gray is None:
        gray = st.get("cues_gray_raw", required=False)
    if gray is None:
        gray = np.zeros_like(color)
    st.put("cues_merged", merge_cues(color, gray))


def _stage_refine(st, cfg):
    cues = st.first("cues_merged", "cues_snapped", "cues_raw")
    if st.record.logits:
        init = imagery.load_scoremap(st.record.logits).astype(np.float64)
    else:
        init = np.zeros(cues.shape)
    r = cfg.refine
    logits, trace = refine_logits(
        st.img, init, cues, cfg.crf, steps=r.steps, lr=r.lr, crf_every=r.crf_every,
        seed_weight=r.seed_weight, boundary_weight=r.boundary_weight,
        cutoff=cfg.io.lattice_cutoff,
    )
    st.put("logits", logits.astype(np.float32))
    trace_path = os.path.join(st.out_dir, f"{st.record.image_id}_loss.csv")
    write_trace_csv(trace, trace_path)
    st.outputs["loss"] = os.path.basename(trace_path)


def _stage_infer(st, cfg):
    if st.get("logits", required=False) is not None:
        logits = st.get("logits")
    elif st.record.logits:
        logits = imagery.load_scoremap(st.record.logits)
    else:
        raise FileNotFoundError(f"no logits for {st.record.image_id}; run refine first")
    predicted = st.record.predicted if st.record.predicted is not None else st.record.present
    spec = AmendSpec(predicted, cfg.amend.margin)
    mask = predict_mask(st.img, softmax(logits), spec, cfg.crf, cutoff=cfg.io.lattice_cutoff)
    st.put("mask", mask)


def _num_classes(st, gt, pred):
    for key in CUE_STAGES + ("logits",):
        value = st.get(key, required=False)
        if value is not None:
            return value.shape[0]
    labels = np.concatenate([gt[gt != IGNORE].ravel(), pred.ravel()])
    return int(labels.max(initial=0)) + 1


def _stage_eval(st, cfg):
    """Per-image confusion counts for the mask and every cue stage present."""
    if not st.record.gt:
        return {}
    gt = imagery.load_mask_png(st.record.gt)
    counts = {}
    for key in ("mask",) + CUE_STAGES:
        value = st.get(key, required=False)
        if value is None:
            continue
        pred = value if key == "mask" else cues_to_mask(value)
        cm = ConfusionMatrix(_num_classes(st, gt, pred)).update(gt, pred)
        counts[key] = cm.counts
    return counts


_RUNNERS = {
    "superpixel": _stage_superpixel,
    "cues": _stage_cues,
    "snap": _stage_snap,
    "merge": _stage_merge,
    "refine": _stage_refine,
    "infer": _stage_infer,
}


def process_image(record, cfg, stages, out_dir):
    """Run ``stages`` on one record; never raises for per-image failures."""
    st = _Image(record, out_dir)
    result = {"image_id": record.image_id, "status": "ok", "outputs": st.outputs}
    try:
        for stage in stages:
            if stage == "eval":
                result["eval"] = _stage_eval(st, cfg)
            else:
                _RUNNERS[stage](st, cfg)
    except (WssError, OSError, ValueError) as exc:
        log.warning("image %s failed: %s", record.image_id, exc)
        result["status"] = "failed"
        result["error"] = f"{type(exc).__name__}: {exc}"
    return result


def _summarize(results):
    summary = {}
    for key in ("mask",) + CUE_STAGES:
        mats = [r["eval"][key] for r in results if key in r.get("eval", {})]
        if not mats:
            continue
        k = max(m.shape[0] for m in mats)
        cm = ConfusionMatrix(k)
        for m in mats:
            cm.counts[: m.shape[0], : m.shape[1]] += m
        entry = {"num_images": len(mats), "miou": None, "miou_foreground": None}
        if cm.total:
            ious = iou_per_class(cm)
            entry["iou"] = {n: (None if np.isnan(v) else float(v)) for n, v in zip(class_names(k), ious)}
            entry["miou"] = miou(cm)
            try:
                entry["miou_foreground"] = miou(cm, range(1, k))
            except WssError:
                pass
        summary[key] = entry
    return summary


def run_pipeline(records, cfg, stages=STAGES, out_dir=None, jobs=1):
    """Process every record and return ``(report, exit_code)``.

    The exit code is 0 when every image succeeded and 1 otherwise.  Output
    paths in the report are relative to ``out_dir``.
    """
    stages = list(stages)
    bad = [s for s in stages if s not in STAGES]
    if bad:
        raise ValueError(f"unknown stages {bad}; choose from {STAGES}")
    out_dir = out_dir or cfg.io.output_dir
    os.makedirs(out_dir, exist_ok=True)
    if jobs > 1 and len(records) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(process_image, records, [cfg] * len(records),
                                    [stages] * len(records), [out_dir] * len(records)))
    else:
        results = [process_image(r, cfg, stages, out_dir) for r in records]

    report = {
        "stages": stages,
        "images": {r["image_id"]: {k: v for k, v in r.items() if k not in ("image_id", "eval")} for r in results},
        "failed": [r["image_id"] for r in results if r["status"] != "ok"],
    }
    if "eval" in stages:
        report["eval"] = _summarize([r for r in results if r["status"] == "ok"])
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    return report, (1 if report["failed"] else 0)
