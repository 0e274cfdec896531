"""Foreground/background cue generation, super-pixel snapping and merging.

A cue set is a (K, H, W) binary array; channel 0 is background.  A pixel
with no channel set is "unknown".
"""
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ClassOutOfRange, DimensionMismatch
from .imagery import check_scoremap
from .superpixel import region_mean


@dataclass(frozen=True)
class CueThresholds:
    fg_ratio: float = 0.3
    bg_abs: float = 0.2
    snap_ratio: float = 0.3

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")

    def to_dict(self):
        return asdict(self)


def check_present(present, num_classes):
    present = [int(c) for c in present]
    if len(set(present)) != len(present):
        raise ValueError(f"duplicate classes in {present}")
    for c in present:
        if not 1 <= c < num_classes:
            raise ClassOutOfRange(f"class {c} outside foreground range 1..{num_classes - 1}")
    return present


def foreground_cues(activations, present, th=None):
    """Threshold class activation maps after subtracting competing classes.

    For every present class the elementwise maximum of the other present
    classes' maps is subtracted (clamped at zero), and pixels strictly
    above ``fg_ratio`` times the channel maximum become cues.
    """
    th = th or CueThresholds()
    act = check_scoremap(activations).astype(np.float64)
    k = act.shape[0]
    present = check_present(present, k)
    cues = np.zeros(act.shape, dtype=np.uint8)
    for c in present:
        others = [o for o in present if o != c]
        m = act[c]
        if others:
            m = np.maximum(m - act[others].max(axis=0), 0.0)
        peak = m.max()
        if peak > 0:
            cues[c] = m > th.fg_ratio * peak
    return cues


def background_cues(feature_sum, th=None):
    """Pixels whose min-max normalised feature response is below ``bg_abs``.

    ``feature_sum`` may be (H, W) or (C, H, W); the latter is summed over C.
    """
    th = th or CueThresholds()
    g = np.asarray(feature_sum, dtype=np.float64)
    if g.ndim == 3:
        g = g.sum(axis=0)
    if g.ndim != 2:
        raise DimensionMismatch(f"feature map must be (H, W) or (C, H, W), got {g.shape}")
    lo, hi = g.min(), g.max()
    if hi == lo:
        return np.zeros(g.shape, dtype=np.uint8)
    g = (g - lo) / (hi - lo)
    return (g < th.bg_abs).astype(np.uint8)


def generate_cues(activations, feature_sum, present, th=None):
    """Foreground cues with the background channel filled in."""
    cues = foreground_cues(activations, present, th)
    bg = background_cues(feature_sum, th)
    if bg.shape != cues.shape[1:]:
        raise DimensionMismatch(f"features are {bg.shape}, activations are {cues.shape[1:]}")
    cues[0] = bg
    return cues


def snap_to_superpixels(cues, labeling, th=None):
    """Average each cue channel over super-pixels and re-binarise.

    The threshold is ``snap_ratio`` times the largest averaged value of
    that channel.
    """
    th = th or CueThresholds()
    cues = np.asarray(cues)
    labeling = np.asarray(labeling)
    if cues.shape[1:] != labeling.shape:
        raise DimensionMismatch(f"cues are {cues.shape[1:]}, labeling is {labeling.shape}")
    out = np.zeros(cues.shape, dtype=np.uint8)
    for c in range(cues.shape[0]):
        if not cues[c].any():
            continue
        means = region_mean(labeling, cues[c])[labeling]
        out[c] = means > th.snap_ratio * means.max()
    return out


def raw_or(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cue sets differ in shape: {a.shape} vs {b.shape}")
    return ((a != 0) | (b != 0)).astype(np.uint8)


def resolve_conflicts(cues):
    """Clear background wherever any foreground channel is set."""
    out = np.array(cues, dtype=np.uint8, copy=True)
    out[0][out[1:].any(axis=0)] = 0
    return out


def merge_cues(a, b, resolve=True):
    """Logical OR of two cue sets, with foreground taking precedence over background."""
    merged = raw_or(a, b)
    return resolve_conflicts(merged) if resolve else merged
