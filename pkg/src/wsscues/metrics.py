"""Confusion matrices, IoU/mIoU and multi-label classification scores."""
import csv
from fractions import Fraction

import numpy as np

from .errors import (
    ClassOutOfRange,
    DimensionMismatch,
    EmptyMatrix,
    IgnoreInPrediction,
    LengthMismatch,
)
from .imagery import IGNORE

VOC_CLASSES = (
    "background", "aeroplane", "bicycle", "bird", "boat", "bottle", "bus",
    "car", "cat", "chair", "cow", "diningtable", "dog", "horse", "motorbike",
    "person", "pottedplant", "sheep", "sofa", "train", "tvmonitor",
)


class ConfusionMatrix:
    """Streaming K x K tally; rows are ground truth, columns prediction."""

    def __init__(self, num_classes):
        self.num_classes = int(num_classes)
        self.counts = np.zeros((self.num_classes, self.num_classes), dtype=np.int64)

    def update(self, gt, pred, ignore_value=IGNORE):
        gt = np.asarray(gt)
        pred = np.asarray(pred)
        if gt.shape != pred.shape:
            raise DimensionMismatch(f"gt is {gt.shape}, prediction is {pred.shape}")
        if np.any(pred == ignore_value):
            raise IgnoreInPrediction("prediction contains the ignore label")
        keep = gt != ignore_value
        g = gt[keep].astype(np.int64)
        p = pred[keep].astype(np.int64)
        k = self.num_classes
        if g.size and (g.min() < 0 or g.max() >= k or p.min() < 0 or p.max() >= k):
            raise ClassOutOfRange(f"labels must lie in 0..{k - 1}")
        self.counts += np.bincount(g * k + p, minlength=k * k).reshape(k, k)
        return self

    def __add__(self, other):
        out = ConfusionMatrix(self.num_classes)
        out.counts = self.counts + other.counts
        return out

    @property
    def total(self):
        return int(self.counts.sum())


def confusion_accumulate(cm, gt, pred, ignore_value=IGNORE):
    return cm.update(gt, pred, ignore_value)


def _counts(cm):
    return cm.counts if isinstance(cm, ConfusionMatrix) else np.asarray(cm, dtype=np.int64)


def _iou_fractions(counts):
    inter = np.diag(counts)
    union = counts.sum(axis=0) + counts.sum(axis=1) - inter
    return [Fraction(int(i), int(u)) if u > 0 else None for i, u in zip(inter, union)]


def iou_per_class(cm):
    """Per-class IoU; NaN where the class is absent from both gt and prediction."""
    return np.array([float(x) if x is not None else np.nan for x in _iou_fractions(_counts(cm))])


def miou(cm, classes=None):
    """Mean IoU over ``classes`` (default all), skipping undefined classes.

    The mean is formed in exact rational arithmetic and rounded once.
    """
    counts = _counts(cm)
    if counts.sum() == 0:
        raise EmptyMatrix("confusion matrix is empty")
    fr = _iou_fractions(counts)
    idx = range(len(fr)) if classes is None else classes
    defined = [fr[c] for c in idx if fr[c] is not None]
    if not defined:
        raise EmptyMatrix("no class in the subset has a defined IoU")
    return float(sum(defined) / len(defined))


def cues_to_mask(cues):
    """Single-label mask from a cue set; unknown pixels become background.

    The lowest set foreground channel wins.
    """
    cues = np.asarray(cues) != 0
    fg = cues[1:]
    has_fg = fg.any(axis=0)
    first = np.argmax(fg, axis=0) + 1
    return np.where(has_fg, first, 0).astype(np.uint8)


def multilabel_scores(pred_sets, true_sets, num_classes):
    """Micro-averaged accuracy and recall over (image, foreground class) decisions."""
    if len(pred_sets) != len(true_sets):
        raise LengthMismatch(f"{len(pred_sets)} predictions vs {len(true_sets)} truths")
    fg = range(1, num_classes)
    correct = total = tp = fn = 0
    for pred, true in zip(pred_sets, true_sets):
        pred, true = set(pred), set(true)
        for c in fg:
            p, t = c in pred, c in true
            correct += p == t
            total += 1
            tp += p and t
            fn += t and not p
    accuracy = correct / total if total else float("nan")
    recall = tp / (tp + fn) if tp + fn else float("nan")
    return accuracy, recall


def format_iou_table(ious, names=None, mean=None):
    names = names or [str(i) for i in range(len(ious))]
    width = max(len(n) for n in list(names) + ["mIoU"])
    lines = []
    for name, v in zip(names, ious):
        val = "   n/a" if np.isnan(v) else f"{100 * v:6.2f}"
        lines.append(f"{name:<{width}}  {val}")
    if mean is not None:
        lines.append(f"{'mIoU':<{width}}  {100 * mean:6.2f}")
    return "\n".join(lines)


def write_iou_csv(ious, path, names=None, mean=None):
    names = names or [str(i) for i in range(len(ious))]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "iou"])
        for name, v in zip(names, ious):
            w.writerow([name, "" if np.isnan(v) else repr(float(v))])
        if mean is not None:
            w.writerow(["mIoU", repr(float(mean))])


def class_names(num_classes):
    if num_classes == len(VOC_CLASSES):
        return list(VOC_CLASSES)
    return [str(i) for i in range(num_classes)]
