"""Command-line front end.

Exit codes: 0 success, 1 per-image failures, 2 configuration error.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from . import imagery
from .config import CONFIG_ENV, PipelineConfig, load_labels, load_manifest, parse_class_list
from .cues import merge_cues, snap_to_superpixels, generate_cues
from .densecrf import crf_refine
from .errors import ConfigError, WssError
from .inference import AmendSpec, predict_mask
from .metrics import ConfusionMatrix, class_names, cues_to_mask, format_iou_table, iou_per_class, miou, write_iou_csv
from .objective import boundary_loss, refine_logits, seeding_loss, softmax, write_trace_csv
from .pipeline import STAGES, _fit, load_feature_map, run_pipeline
from .superpixel import boundary_overlay, num_segments, segment_felzenszwalb

log = logging.getLogger("wsscues")

# flag -> (config section, key)
_OVERRIDES = {
    "sigma": ("felzenszwalb", "sigma"),
    "k": ("felzenszwalb", "k"),
    "min_size": ("felzenszwalb", "min_size"),
    "w1": ("crf", "w1"),
    "w2": ("crf", "w2"),
    "sigma_alpha": ("crf", "sigma_alpha"),
    "sigma_beta": ("crf", "sigma_beta"),
    "sigma_gamma": ("crf", "sigma_gamma"),
    "iterations": ("crf", "iterations"),
    "fg_ratio": ("thresholds", "fg_ratio"),
    "bg_abs": ("thresholds", "bg_abs"),
    "snap_ratio": ("thresholds", "snap_ratio"),
    "margin": ("amend", "margin"),
    "steps": ("refine", "steps"),
    "lr": ("refine", "lr"),
    "crf_every": ("refine", "crf_every"),
    "lattice_cutoff": ("io", "lattice_cutoff"),
}


def _add_felz(p):
    g = p.add_argument_group("super-pixels")
    g.add_argument("--sigma", type=float)
    g.add_argument("--k", type=float)
    g.add_argument("--min-size", type=int)


def _add_crf(p):
    g = p.add_argument_group("dense CRF")
    g.add_argument("--w1", type=float)
    g.add_argument("--w2", type=float)
    g.add_argument("--sigma-alpha", type=float)
    g.add_argument("--sigma-beta", type=float)
    g.add_argument("--sigma-gamma", type=float)
    g.add_argument("--iterations", type=int)
    g.add_argument("--lattice-cutoff", type=int)


def _add_thresholds(p):
    g = p.add_argument_group("cue thresholds")
    g.add_argument("--fg-ratio", type=float)
    g.add_argument("--bg-abs", type=float)
    g.add_argument("--snap-ratio", type=float)


def _add_refine(p):
    g = p.add_argument_group("refinement")
    g.add_argument("--steps", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--crf-every", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="wsscues", description=__doc__)
    parser.add_argument("--config", help=f"JSON pipeline config (default: ${CONFIG_ENV})")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("superpixel", help="graph-based super-pixel segmentation")
    p.add_argument("image")
    p.add_argument("-o", "--output", required=True, help="labeling .npy")
    p.add_argument("--overlay", help="also write a boundary overlay PNG")
    _add_felz(p)

    cues = sub.add_parser("cues", help="cue generation, snapping and merging")
    csub = cues.add_subparsers(dest="cues_command", required=True)
    p = csub.add_parser("generate", help="cues from activation and feature maps")
    p.add_argument("--activations", required=True, help="(K, H, W) float32 .npy")
    p.add_argument("--features", required=True, help="(H, W) or (C, H, W) float .npy")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--present", help="comma-separated foreground class indices")
    grp.add_argument("--labels", help="JSON {image_id: [classes]} manifest (needs --image-id)")
    p.add_argument("--image-id")
    p.add_argument("--image", help="resize maps to this image's size")
    p.add_argument("-o", "--output", required=True)
    _add_thresholds(p)
    p = csub.add_parser("snap", help="snap cues to super-pixels")
    p.add_argument("cues")
    p.add_argument("--superpixels", required=True)
    p.add_argument("-o", "--output", required=True)
    _add_thresholds(p)
    p = csub.add_parser("merge", help="OR two cue sets")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--no-resolve", action="store_true", help="keep background/foreground overlaps")

    loss = sub.add_parser("loss", help="loss evaluation")
    lsub = loss.add_subparsers(dest="loss_command", required=True)
    p = lsub.add_parser("eval", help="seeding and boundary losses of a probability map")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--probs", help="(K, H, W) probability .npy")
    src.add_argument("--logits", help="(K, H, W) logits .npy")
    p.add_argument("--cues", required=True)
    tgt = p.add_mutually_exclusive_group(required=True)
    tgt.add_argument("--image", help="compute the CRF target from this image")
    tgt.add_argument("--crf-out", help="precomputed CRF posterior .npy")
    _add_crf(p)

    p = sub.add_parser("refine", help="gradient-descent logits refinement")
    p.add_argument("--image", required=True)
    p.add_argument("--cues", required=True)
    p.add_argument("--init", help="initial logits .npy (default zeros)")
    p.add_argument("-o", "--output", required=True, help="refined logits .npy")
    p.add_argument("--trace", help="loss trace CSV")
    _add_refine(p)
    _add_crf(p)

    p = sub.add_parser("infer", help="amend, CRF-refine and argmax to a mask")
    p.add_argument("--image", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--probs")
    src.add_argument("--logits")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--predicted", help="comma-separated predicted classes")
    grp.add_argument("--labels", help="JSON {image_id: [classes]} manifest (needs --image-id)")
    p.add_argument("--image-id")
    p.add_argument("--margin", type=float)
    p.add_argument("-o", "--output", required=True, help="mask PNG")
    _add_crf(p)

    p = sub.add_parser("eval", help="per-class IoU and mIoU")
    p.add_argument("--gt", nargs="+", required=True, help="ground-truth mask PNGs")
    p.add_argument("--pred", nargs="+", required=True, help="predicted mask PNGs or cue .npy files")
    p.add_argument("--num-classes", type=int, default=21)
    p.add_argument("--foreground-only", action="store_true")
    p.add_argument("--csv", help="also write the table as CSV")

    p = sub.add_parser("viz", help="render masks, cue channels or super-pixels")
    p.add_argument("input", help="mask .png, cue set .npy or labeling .npy")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--channel", type=int, help="cue channel to render (default: collapse)")
    p.add_argument("--image", help="base image for super-pixel overlays")

    p = sub.add_parser("pipeline", help="run stages over a manifest")
    p.add_argument("manifest")
    p.add_argument("--stages", default=",".join(STAGES), help="comma-separated stage list")
    p.add_argument("--out", help="output directory (overrides io.output_dir)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    _add_felz(p)
    _add_crf(p)
    _add_thresholds(p)
    _add_refine(p)
    p.add_argument("--margin", type=float)
    return parser


def load_config(args):
    path = args.config or os.environ.get(CONFIG_ENV)
    cfg = PipelineConfig.load(path) if path else PipelineConfig()
    by_section = {}
    for flag, (section, key) in _OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            by_section.setdefault(section, {})[key] = value
    for section, values in by_section.items():
        cfg = cfg.override(section, **values)
    return cfg


def _classes(args, option):
    if getattr(args, option, None) is not None:
        return parse_class_list(getattr(args, option))
    if not args.image_id:
        raise ConfigError("--labels requires --image-id")
    labels = load_labels(args.labels)
    if args.image_id not in labels:
        raise ConfigError(f"{args.image_id!r} not in {args.labels}")
    return labels[args.image_id]


def _probs(args):
    if args.logits:
        return softmax(imagery.load_scoremap(args.logits))
    return imagery.load_scoremap(args.probs).astype(np.float64)


def cmd_superpixel(args, cfg):
    img = imagery.load_image(args.image)
    labels = segment_felzenszwalb(img, cfg.felzenszwalb)
    imagery.save_labeling(labels, args.output)
    if args.overlay:
        imagery.save_image(boundary_overlay(img, labels), args.overlay)
    print(f"{num_segments(labels)} segments -> {args.output}")


def cmd_cues(args, cfg):
    if args.cues_command == "generate":
        act = imagery.load_scoremap(args.activations)
        feats = load_feature_map(args.features)
        feats = feats if feats.ndim == 3 else feats[None]
        if args.image:
            hw = imagery.load_image(args.image).shape[:2]
            act, feats = _fit(act, hw), _fit(feats, hw)
        elif feats.shape[-2:] != act.shape[-2:]:
            feats = _fit(feats, act.shape[-2:])
        out = generate_cues(act, feats, _classes(args, "present"), cfg.thresholds)
    elif args.cues_command == "snap":
        out = snap_to_superpixels(imagery.load_cues(args.cues), imagery.load_labeling(args.superpixels), cfg.thresholds)
    else:
        out = merge_cues(imagery.load_cues(args.a), imagery.load_cues(args.b), resolve=not args.no_resolve)
    imagery.save_cues(out, args.output)
    print(f"{int(out.sum())} cue elements -> {args.output}")


def cmd_loss(args, cfg):
    probs = _probs(args)
    cues = imagery.load_cues(args.cues)
    if args.crf_out:
        target = imagery.load_scoremap(args.crf_out)
    else:
        target = crf_refine(imagery.load_image(args.image), probs, cfg.crf, cutoff=cfg.io.lattice_cutoff)
    ls, _ = seeding_loss(probs, cues)
    lc, _ = boundary_loss(probs, target)
    print(json.dumps({"seeding": ls, "boundary": lc, "total": ls + lc}))


def cmd_refine(args, cfg):
    img = imagery.load_image(args.image)
    cues = imagery.load_cues(args.cues)
    init = imagery.load_scoremap(args.init) if args.init else np.zeros(cues.shape)
    r = cfg.refine
    logits, trace = refine_logits(
        img, init, cues, cfg.crf, steps=r.steps, lr=r.lr, crf_every=r.crf_every,
        seed_weight=r.seed_weight, boundary_weight=r.boundary_weight, cutoff=cfg.io.lattice_cutoff,
    )
    imagery.save_scoremap(logits, args.output)
    if args.trace:
        write_trace_csv(trace, args.trace)
    if trace:
        last = trace[-1]
        print(f"step {len(trace) - 1}: seeding={last.seeding:.6f} boundary={last.boundary:.6f} total={last.total:.6f}")


def cmd_infer(args, cfg):
    img = imagery.load_image(args.image)
    spec = AmendSpec(_classes(args, "predicted"), cfg.amend.margin)
    mask = predict_mask(img, _probs(args), spec, cfg.crf, cutoff=cfg.io.lattice_cutoff)
    imagery.save_mask_png(mask, args.output)
    print(f"mask -> {args.output}")


def _load_prediction(path):
    if path.endswith(".npy"):
        return cues_to_mask(imagery.load_cues(path))
    return imagery.load_mask_png(path)


def cmd_eval(args, cfg):
    if len(args.gt) != len(args.pred):
        raise ConfigError(f"{len(args.gt)} ground truths vs {len(args.pred)} predictions")
    cm = ConfusionMatrix(args.num_classes)
    for gt_path, pred_path in zip(args.gt, args.pred):
        cm.update(imagery.load_mask_png(gt_path), _load_prediction(pred_path))
    names = class_names(args.num_classes)
    subset = range(1, args.num_classes) if args.foreground_only else None
    ious = iou_per_class(cm)
    mean = miou(cm, subset)
    print(format_iou_table(ious, names, mean))
    if args.csv:
        write_iou_csv(ious, args.csv, names, mean)


def cmd_viz(args, cfg):
    path = args.input
    if path.endswith(".png"):
        imagery.save_mask_png(imagery.load_mask_png(path), args.output)
        return
    arr = np.load(path, allow_pickle=False)
    if arr.ndim == 3:
        cues = arr != 0
        if args.channel is None:
            mask = cues_to_mask(cues)
        else:
            mask = np.where(cues[args.channel], args.channel, 0).astype(np.uint8)
        imagery.save_mask_png(mask, args.output)
    elif arr.ndim == 2 and args.image:
        imagery.save_image(boundary_overlay(imagery.load_image(args.image), arr), args.output)
    elif arr.ndim == 2:
        imagery.save_mask_png(arr.astype(np.int64) % 256, args.output)
    else:
        raise ConfigError(f"cannot render an array of shape {arr.shape}")
    print(f"-> {args.output}")


def cmd_pipeline(args, cfg):
    records = load_manifest(args.manifest)
    stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    bad = [s for s in stages if s not in STAGES]
    if bad:
        raise ConfigError(f"unknown stages {bad}")
    report, code = run_pipeline(records, cfg, stages, out_dir=args.out, jobs=max(1, args.jobs))
    for image_id in report["failed"]:
        print(f"FAILED {image_id}: {report['images'][image_id]['error']}", file=sys.stderr)
    for key, entry in report.get("eval", {}).items():
        if entry["miou"] is not None:
            print(f"{key}: mIoU {100 * entry['miou']:.2f} over {entry['num_images']} images")
    return code


_COMMANDS = {
    "superpixel": cmd_superpixel,
    "cues": cmd_cues,
    "loss": cmd_loss,
    "refine": cmd_refine,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "viz": cmd_viz,
    "pipeline": cmd_pipeline,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args, cfg) or 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (WssError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
