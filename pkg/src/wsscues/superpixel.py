"""Graph-based super-pixel segmentation (Felzenszwalb & Huttenlocher).

Pixels are the vertices of an 8-connected grid graph whose edges carry the
Euclidean RGB distance between smoothed endpoint colours.  Edges are
processed in ascending weight order, ties broken by construction order, so
the output is reproducible bit for bit.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _backend
from .errors import DimensionMismatch
from .imagery import check_image


@dataclass(frozen=True)
class FelzParams:
    sigma: float = 0.5
    k: float = 500.0
    min_size: int = 50

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not self.k > 0:
            raise ValueError(f"k must be > 0, got {self.k}")
        if int(self.min_size) != self.min_size or self.min_size < 1:
            raise ValueError(f"min_size must be an integer >= 1, got {self.min_size}")

    def to_dict(self):
        return asdict(self)


def gaussian_kernel(sigma):
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def smooth(img, sigma):
    """Separable Gaussian blur of each channel with clamped edges."""
    out = np.asarray(img, dtype=np.float64)
    if sigma == 0:
        return out.copy()
    g = gaussian_kernel(sigma)
    r = len(g) // 2
    for axis in (0, 1):
        n = out.shape[axis]
        idx = np.clip(np.arange(-r, n + r), 0, n - 1)
        padded = np.take(out, idx, axis=axis)
        acc = np.zeros_like(out)
        for t, wt in enumerate(g):
            acc += wt * np.take(padded, np.arange(t, t + n), axis=axis)
        out = acc
    return out


# neighbour offsets (dy, dx) in construction order: right, down, down-right, up-right
_NEIGHBOURS = ((0, 1), (1, 0), (1, 1), (-1, 1))


def grid_edges(img):
    """Edges of the 8-connected grid as ``(a, b, weight)`` in construction order.

    Pixels are visited in row-major order and, for each, the edges to the
    right, down, down-right and up-right neighbours are emitted (when they
    exist).
    """
    h, w = img.shape[:2]
    flat = img.reshape(h * w, -1)
    ys, xs = np.divmod(np.arange(h * w), w)
    src, dst, ok = [], [], []
    for dy, dx in _NEIGHBOURS:
        ny, nx = ys + dy, xs + dx
        valid = (ny >= 0) & (ny < h) & (nx < w)
        src.append(np.arange(h * w))
        dst.append(np.where(valid, ny * w + nx, 0))
        ok.append(valid)
    # (pixel, direction) ordering
    a = np.stack(src, axis=1).ravel()
    b = np.stack(dst, axis=1).ravel()
    keep = np.stack(ok, axis=1).ravel()
    a, b = a[keep], b[keep]
    diff = flat[a] - flat[b]
    weight = np.sqrt(np.sum(diff * diff, axis=1))
    return a, b, weight


def relabel_first_seen(roots):
    """Map arbitrary ids to 0..n-1 in order of first appearance."""
    roots = np.asarray(roots).ravel()
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    new_id = np.empty_like(order)
    new_id[order] = np.arange(len(order))
    return new_id[inverse.ravel()]


def segment_felzenszwalb(img, params=None, backend=None):
    """Segment an RGB image into super-pixels.

    Returns an (H, W) int32 labeling with ids 0..n-1 numbered in raster
    order of each segment's first pixel.
    """
    img = check_image(img)
    params = params or FelzParams()
    h, w = img.shape[:2]
    smoothed = smooth(img, params.sigma)
    a, b, weight = grid_edges(smoothed)
    order = np.argsort(weight, kind="stable")
    kernels = _backend.get(backend)
    roots = kernels.fh_merge(a[order], b[order], weight[order], h * w, float(params.k), int(params.min_size))
    return relabel_first_seen(roots).reshape(h, w).astype(np.int32)


def num_segments(labeling):
    return int(np.asarray(labeling).max()) + 1


def region_mean(labeling, channel):
    """Mean of ``channel`` over each segment, indexed by segment id."""
    labeling = np.asarray(labeling)
    channel = np.asarray(channel, dtype=np.float64)
    if labeling.shape != channel.shape:
        raise DimensionMismatch(f"labeling is {labeling.shape}, channel is {channel.shape}")
    ids = labeling.ravel()
    n = int(ids.max()) + 1
    counts = np.bincount(ids, minlength=n)
    sums = np.bincount(ids, weights=channel.ravel(), minlength=n)
    return sums / counts


def boundaries(labeling):
    """Boolean mask of pixels whose right or lower neighbour has another id."""
    lab = np.asarray(labeling)
    edge = np.zeros(lab.shape, dtype=bool)
    edge[:, :-1] |= lab[:, :-1] != lab[:, 1:]
    edge[:-1, :] |= lab[:-1, :] != lab[1:, :]
    return edge


def boundary_overlay(img, labeling, color=(255, 0, 0)):
    """Copy of ``img`` with segment boundaries painted in ``color``."""
    img = check_image(img)
    if img.shape[:2] != np.asarray(labeling).shape:
        raise DimensionMismatch("image and labeling sizes differ")
    out = img.copy()
    out[boundaries(labeling)] = color
    return out
