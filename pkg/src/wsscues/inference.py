"""Test-time mask prediction with classifier-based class suppression."""
from dataclasses import dataclass

import numpy as np

from .densecrf import DEFAULT_CUTOFF, crf_refine
from .errors import ClassOutOfRange, EmptyPrediction
from .imagery import check_scoremap

DEFAULT_MARGIN = 1e-4


@dataclass(frozen=True)
class AmendSpec:
    """Classes predicted present in an image; background is always added."""

    predicted: frozenset
    margin: float = DEFAULT_MARGIN

    def __init__(self, predicted, margin=DEFAULT_MARGIN, include_background=True):
        classes = {int(c) for c in predicted}
        if include_background:
            classes.add(0)
        if not classes:
            raise EmptyPrediction("no classes predicted")
        if any(c < 0 for c in classes):
            raise ClassOutOfRange(f"negative class index in {sorted(classes)}")
        if not margin > 0:
            raise ValueError(f"margin must be > 0, got {margin}")
        object.__setattr__(self, "predicted", frozenset(classes))
        object.__setattr__(self, "margin", float(margin))


def threshold_predictions(scores, threshold=0.5):
    """Class indices whose classifier score reaches ``threshold``.

    ``scores`` maps class index to score (dict) or is a sequence indexed by
    class.
    """
    items = scores.items() if isinstance(scores, dict) else enumerate(scores)
    return sorted(int(c) for c, s in items if s >= threshold)


def amend_scores(probs, spec):
    """Cap non-predicted classes just below the best predicted score.

    At every pixel the ceiling is the largest score among predicted
    classes; other classes are lowered to ``ceiling - margin`` (never
    below 0) when they exceed it.  The result is no longer normalised.
    """
    probs = check_scoremap(probs)
    k = probs.shape[0]
    pred = sorted(spec.predicted)
    if pred[-1] >= k:
        raise ClassOutOfRange(f"class {pred[-1]} >= number of classes {k}")
    out = probs.copy()
    ceiling = probs[pred].max(axis=0)
    cap = np.maximum(ceiling - probs.dtype.type(spec.margin), 0)
    for j in range(k):
        if j not in spec.predicted:
            out[j] = np.minimum(out[j], cap)
    return out


def renormalize(scores):
    """Divide by per-pixel sums; pixels summing to zero become uniform."""
    scores = np.asarray(scores, dtype=np.float64)
    total = scores.sum(axis=0, keepdims=True)
    uniform = np.full_like(scores, 1.0 / scores.shape[0])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, scores / np.where(total > 0, total, 1.0), uniform)


def argmax_mask(probs):
    """Per-pixel argmax; ties go to the lowest class index."""
    return np.argmax(np.asarray(probs), axis=0).astype(np.uint8)


def predict_mask(img, probs, spec, crf=None, cutoff=DEFAULT_CUTOFF):
    """Amend, renormalise, refine with the CRF and take the argmax."""
    amended = amend_scores(probs, spec)
    posterior = crf_refine(img, renormalize(amended), crf, cutoff=cutoff)
    return argmax_mask(posterior)
