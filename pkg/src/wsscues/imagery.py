"""Image and array types, conversions, resizing and file I/O.

Arrays are plain numpy arrays with fixed layouts:

======================  ==============  =========
kind                    shape           dtype
======================  ==============  =========
RGB image               (H, W, 3)       uint8
gray image              (H, W)          uint8
score / activation map  (K, H, W)       float32
cue set                 (K, H, W)       uint8 {0,1}
super-pixel labeling    (H, W)          int32
label mask              (H, W)          uint8, 255 = ignore
======================  ==============  =========
"""
import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DecodeError,
    DimensionMismatch,
    DTypeError,
    EncodeError,
    KindError,
    PaletteMismatch,
    ShapeError,
    UnsupportedFormat,
    ZeroDimension,
)

IGNORE = 255
PROB_TOL = 1e-5


def check_image(img):
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ShapeError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise DTypeError(f"expected uint8 image, got {img.dtype}")
    return img


def check_scoremap(scores, kind="raw"):
    """Validate a (K, H, W) score map; ``kind="probability"`` also checks sums."""
    scores = np.asarray(scores)
    if scores.ndim != 3:
        raise ShapeError(f"expected a (K, H, W) score map, got shape {scores.shape}")
    if not np.issubdtype(scores.dtype, np.floating):
        raise DTypeError(f"score maps must be real-valued, got {scores.dtype}")
    if kind == "probability":
        if np.any(scores < 0) or not np.allclose(scores.sum(axis=0), 1.0, rtol=0, atol=PROB_TOL):
            raise KindError("score map is not a per-pixel probability distribution")
    return scores


def check_same_hw(img, scores):
    if img.shape[:2] != scores.shape[-2:]:
        raise DimensionMismatch(f"image is {img.shape[:2]}, map is {scores.shape[-2:]}")


def load_image(path):
    """Decode an 8-bit RGB/RGBA PNG into an (H, W, 3) uint8 array."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise UnsupportedFormat(f"{path}: expected PNG, got {im.format}")
            if im.mode not in ("RGB", "RGBA", "L", "P"):
                raise UnsupportedFormat(f"{path}: unsupported mode {im.mode} (need 8-bit)")
            im.load()
            rgb = im.convert("RGB")
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    return np.array(rgb, dtype=np.uint8)


def save_image(img, path):
    Image.fromarray(check_image(img), mode="RGB").save(path, format="PNG")


def to_gray(img):
    """Rec.601 luma, rounded half up: (299 R + 587 G + 114 B + 500) // 1000."""
    img = check_image(img).astype(np.int32)
    y = (299 * img[..., 0] + 587 * img[..., 1] + 114 * img[..., 2] + 500) // 1000
    return np.clip(y, 0, 255).astype(np.uint8)


def gray_to_rgb(gray):
    gray = np.asarray(gray, dtype=np.uint8)
    return np.repeat(gray[..., None], 3, axis=2)


def _axis_weights(n_in, n_out):
    # align-corners-false source coordinate, clamped to the valid range
    x = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    x = np.clip(x, 0.0, n_in - 1)
    i0 = np.floor(x).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, x - i0


def resize_bilinear(scores, out_h, out_w):
    """Bilinearly resample every channel of a (K, H, W) map to (out_h, out_w)."""
    scores = check_scoremap(scores)
    if out_h < 1 or out_w < 1:
        raise ZeroDimension(f"output size must be positive, got {out_h}x{out_w}")
    _, h, w = scores.shape
    if (h, w) == (out_h, out_w):
        return scores.astype(np.float32, copy=True)
    y0, y1, fy = _axis_weights(h, out_h)
    x0, x1, fx = _axis_weights(w, out_w)
    s = scores.astype(np.float64)
    top = s[:, y0, :] * (1.0 - fy)[None, :, None] + s[:, y1, :] * fy[None, :, None]
    out = top[:, :, x0] * (1.0 - fx) + top[:, :, x1] * fx
    return out.astype(np.float32)


def _save_npy(arr, path):
    with open(path, "wb") as fh:
        np.lib.format.write_array(fh, np.ascontiguousarray(arr), version=(1, 0), allow_pickle=False)


def _load_npy(path, ndim, dtype, what):
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        arr = np.load(path, allow_pickle=False)
    except ValueError as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    if arr.ndim != ndim:
        raise ShapeError(f"{path}: {what} must have rank {ndim}, got shape {arr.shape}")
    if arr.dtype != np.dtype(dtype):
        raise DTypeError(f"{path}: {what} must be {np.dtype(dtype).str}, got {arr.dtype.str}")
    return np.ascontiguousarray(arr)


def save_scoremap(scores, path):
    scores = np.asarray(scores)
    if scores.ndim != 3:
        raise ShapeError(f"score map must be (K, H, W), got {scores.shape}")
    _save_npy(scores.astype("<f4"), path)


def load_scoremap(path):
    return _load_npy(path, 3, "<f4", "score map")


def save_cues(cues, path):
    cues = np.asarray(cues)
    if cues.ndim != 3:
        raise ShapeError(f"cue set must be (K, H, W), got {cues.shape}")
    _save_npy((cues != 0).astype(np.uint8), path)


def load_cues(path):
    cues = _load_npy(path, 3, np.uint8, "cue set")
    if cues.max(initial=0) > 1:
        raise DecodeError(f"{path}: cue set values must be 0 or 1")
    return cues


def save_labeling(labels, path):
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ShapeError(f"labeling must be (H, W), got {labels.shape}")
    _save_npy(labels.astype("<i4"), path)


def load_labeling(path):
    return _load_npy(path, 2, "<i4", "labeling")


def voc_palette(n=256):
    """The PASCAL VOC colour map as an (n, 3) uint8 array."""
    pal = np.zeros((n, 3), dtype=np.uint8)
    for i in range(n):
        c = i
        r = g = b = 0
        for j in range(8):
            r |= ((c >> 0) & 1) << (7 - j)
            g |= ((c >> 1) & 1) << (7 - j)
            b |= ((c >> 2) & 1) << (7 - j)
            c >>= 3
        pal[i] = (r, g, b)
    return pal


VOC_PALETTE = voc_palette()


def save_mask_png(mask, path):
    """Write an (H, W) label mask as an indexed PNG with the VOC palette."""
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.size == 0:
        raise EncodeError(f"mask must be a non-empty (H, W) array, got {mask.shape}")
    if not np.issubdtype(mask.dtype, np.integer):
        raise EncodeError(f"mask must hold integer labels, got {mask.dtype}")
    if mask.min() < 0 or mask.max() > 255:
        raise EncodeError("mask labels must lie in 0..255")
    im = Image.fromarray(mask.astype(np.uint8), mode="P")
    im.putpalette(VOC_PALETTE.ravel().tolist())
    try:
        im.save(path, format="PNG")
    except OSError as exc:
        raise EncodeError(f"{path}: {exc}") from exc


def load_mask_png(path):
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode != "P":
                raise PaletteMismatch(f"{path}: expected an indexed PNG, got mode {im.mode}")
            pal = np.asarray(im.getpalette() or [], dtype=np.uint8).reshape(-1, 3)
            mask = np.array(im, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    used = np.unique(mask)
    if used.max() >= len(pal) or not np.array_equal(pal[used], VOC_PALETTE[used]):
        raise PaletteMismatch(f"{path}: palette differs from the VOC colour map")
    return mask


def colorize(mask):
    """Map an (H, W) label mask to an (H, W, 3) RGB image."""
    return VOC_PALETTE[np.asarray(mask, dtype=np.uint8)]
