"""Seeded synthetic scenes with exact ground truth, for demos and end-to-end checks.

Each scene is a flat background with a two-tone rectangle (class 1) and a
two-tone disc (class 2).  The color-classifier activation is a Gaussian
blob over one tone of each shape and the gray-classifier activation covers
the other tone, so the two cue sources are complementary.  The feature map
is a wide blob around both shapes, leaving the far background as the
low-response region.
"""
import json
import os
from dataclasses import dataclass

import numpy as np

from . import imagery

NUM_CLASSES = 3
PRESENT = (1, 2)
FG_COVERAGE = 0.4


@dataclass
class Scene:
    image: np.ndarray  # (H, W, 3) uint8
    gt: np.ndarray  # (H, W) uint8
    activations: np.ndarray  # (3, H, W) float32
    gray_activations: np.ndarray
    features: np.ndarray  # (H, W) float32


def _blob(yy, xx, center, area):
    """Gaussian whose region above 0.3 of its peak has roughly ``area`` pixels."""
    radius = np.sqrt(area / np.pi)
    sigma = radius / np.sqrt(2 * np.log(1 / 0.3))
    d2 = (yy - center[0]) ** 2 + (xx - center[1]) ** 2
    return np.exp(-d2 / (2 * sigma * sigma))


def _centroid(mask):
    ys, xs = np.nonzero(mask)
    return ys.mean(), xs.mean()


def make_scene(seed, size=64):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    half = size // 2

    h, w = int(rng.integers(18, 26)), int(rng.integers(14, 20))
    y0 = int(rng.integers(4, size - 4 - h))
    x0 = int(rng.integers(3, half - 1 - w))
    rect = (yy >= y0) & (yy < y0 + h) & (xx >= x0) & (xx < x0 + w)
    rect_a = rect & (yy < y0 + h // 2)

    r = int(rng.integers(10, 13))
    cy = int(rng.integers(4 + r, size - 4 - r))
    cx = int(rng.integers(half + 2 + r, size - 3 - r))
    disc = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    disc_a = disc & (xx < cx)

    gt = np.zeros((size, size), dtype=np.uint8)
    gt[rect] = 1
    gt[disc] = 2

    base = rng.integers(20, 60, size=3)
    tones = [rng.integers(150, 230, size=3), rng.integers(60, 140, size=3)]
    img = np.empty((size, size, 3), dtype=np.int64)
    img[:] = base
    img[rect_a] = tones[0]
    img[rect & ~rect_a] = tones[0] // 2 + 20
    img[disc_a] = tones[1]
    img[disc & ~disc_a] = tones[1] // 2 + 90

    color = np.zeros((NUM_CLASSES, size, size), dtype=np.float32)
    gray = np.zeros_like(color)
    for cls, shape, part in ((1, rect, rect_a), (2, disc, disc_a)):
        area = FG_COVERAGE * shape.sum()
        color[cls] = _blob(yy, xx, _centroid(part), area)
        gray[cls] = _blob(yy, xx, _centroid(shape & ~part), area)

    spread = [_blob(yy, xx, _centroid(m), 5.0 * m.sum()) for m in (rect, disc)]
    features = np.maximum(*spread).astype(np.float32)
    return Scene(img.astype(np.uint8), gt, color, gray, features)


def write_scene(scene, directory, image_id):
    """Write one scene's files and return its manifest record (relative paths)."""
    os.makedirs(directory, exist_ok=True)
    names = {
        "image": f"{image_id}.png",
        "gt": f"{image_id}_gt.png",
        "activations": f"{image_id}_cam.npy",
        "gray_activations": f"{image_id}_graycam.npy",
        "features": f"{image_id}_feat.npy",
    }
    path = {k: os.path.join(directory, v) for k, v in names.items()}
    imagery.save_image(scene.image, path["image"])
    imagery.save_mask_png(scene.gt, path["gt"])
    imagery.save_scoremap(scene.activations, path["activations"])
    imagery.save_scoremap(scene.gray_activations, path["gray_activations"])
    np.save(path["features"], scene.features)
    return {"image_id": image_id, "present": list(PRESENT), **names}


def write_dataset(directory, seeds, size=64):
    """Write scenes for ``seeds`` plus ``manifest.json``; returns the manifest path."""
    records = [write_scene(make_scene(s, size), directory, f"scene{s:03d}") for s in seeds]
    manifest = os.path.join(directory, "manifest.json")
    with open(manifest, "w") as fh:
        json.dump({"images": records}, fh, indent=2)
    return manifest
