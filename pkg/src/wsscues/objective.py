"""Seeding and constrain-to-boundary losses, and a direct logits refiner.

Both losses are evaluated on per-pixel class probabilities F (K, H, W).
The refiner parametrises F as a per-pixel softmax over free logits and
minimises ``seed_weight * L_s + boundary_weight * L_c`` by plain gradient
descent, holding the CRF target fixed between recomputations.
"""
import csv
from dataclasses import astuple, dataclass

import numpy as np

from .densecrf import DEFAULT_CUTOFF, CrfParams, DenseCRF, choose_method
from .errors import DimensionMismatch, EmptyCues
from .imagery import check_image

LOG_FLOOR = 1e-8


@dataclass(frozen=True)
class LossReport:
    seeding: float
    boundary: float
    total: float


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def seeding_loss(probs, cues):
    """Mean negative log-probability over the set elements of ``cues``.

    Returns ``(value, grad)`` with ``grad`` the derivative with respect to
    ``probs``: ``-1 / (|C| p)`` at cue elements and 0 elsewhere.
    """
    probs = np.asarray(probs, dtype=np.float64)
    mask = np.asarray(cues) != 0
    if probs.shape != mask.shape:
        raise DimensionMismatch(f"probs are {probs.shape}, cues are {mask.shape}")
    count = int(mask.sum())
    if count == 0:
        raise EmptyCues("cue set has no elements")
    p = np.maximum(probs, LOG_FLOOR)
    value = -np.log(p[mask]).sum() / count
    grad = np.zeros_like(probs)
    grad[mask] = -1.0 / (count * p[mask])
    return float(value), grad


def boundary_loss(probs, target):
    """KL divergence of ``probs`` from the CRF output, averaged over all elements.

    ``target`` is treated as a constant.  Returns ``(value, grad)`` with
    ``grad = -Q / (n F)`` the derivative with respect to ``probs``.
    """
    f = np.asarray(probs, dtype=np.float64)
    q = np.asarray(target, dtype=np.float64)
    if f.shape != q.shape:
        raise DimensionMismatch(f"probs are {f.shape}, target is {q.shape}")
    n = f.size
    f_fl = np.maximum(f, LOG_FLOOR)
    q_fl = np.maximum(q, LOG_FLOOR)
    terms = np.where(q > 0, q * (np.log(q_fl) - np.log(f_fl)), 0.0)
    value = terms.sum() / n
    grad = -q / (n * f_fl)
    return float(value), grad


def chain_softmax(probs, grad_probs):
    """Pull a gradient w.r.t. softmax probabilities back to the logits."""
    inner = (probs * grad_probs).sum(axis=0, keepdims=True)
    return probs * (grad_probs - inner)


def total_loss(logits, cues, target, seed_weight=1.0, boundary_weight=1.0):
    """Loss report and logits gradient for a fixed CRF target."""
    probs = softmax(logits)
    ls, gs = seeding_loss(probs, cues)
    lc, gc = boundary_loss(probs, target)
    report = LossReport(ls, lc, seed_weight * ls + boundary_weight * lc)
    grad = chain_softmax(probs, seed_weight * gs + boundary_weight * gc)
    return report, grad


def refine_logits(
    img,
    init,
    cues,
    crf=None,
    steps=100,
    lr=1.0,
    crf_every=1,
    seed_weight=1.0,
    boundary_weight=1.0,
    cutoff=DEFAULT_CUTOFF,
):
    """Gradient descent on per-pixel logits against cue and CRF targets.

    Returns ``(logits, trace)`` where ``trace`` holds one :class:`LossReport`
    per step, evaluated before that step's update.
    """
    img = check_image(img)
    theta = np.array(init, dtype=np.float64, copy=True)
    if steps < 0 or not lr > 0 or crf_every < 1:
        raise ValueError("need steps >= 0, lr > 0, crf_every >= 1")
    if theta.shape != np.shape(cues):
        raise DimensionMismatch(f"logits are {theta.shape}, cues are {np.shape(cues)}")
    trace = []
    if steps == 0:
        return np.array(init, copy=True), trace
    crf = crf or CrfParams()
    engine = DenseCRF(img, crf, method=choose_method(img.shape[0] * img.shape[1], cutoff))
    target = None
    for step in range(steps):
        if step % crf_every == 0:
            target = engine.infer(softmax(theta))
        report, grad = total_loss(theta, cues, target, seed_weight, boundary_weight)
        trace.append(report)
        theta -= lr * grad
    return theta, trace


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "seeding", "boundary", "total"])
        for step, report in enumerate(trace):
            writer.writerow([step, *(repr(v) for v in astuple(report))])
