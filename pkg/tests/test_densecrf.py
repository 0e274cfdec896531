import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_image, random_probs
from wsscues import densecrf
from wsscues.densecrf import (
    CrfParams,
    DenseCRF,
    choose_method,
    crf_refine,
    mean_field_lattice,
    mean_field_naive,
    unary_from_probs,
)
from wsscues.errors import ConfigError, DimensionMismatch, KindError


def loop_mean_field(img, probs, p, iterations):
    """Pixel-by-pixel transcription of the Potts mean-field update."""
    k, h, w = probs.shape
    unary = -np.log(np.maximum(probs, 1e-8))
    q = probs.astype(np.float64).copy()
    pix = [(y, x) for y in range(h) for x in range(w)]
    col = img.astype(np.float64)
    for _ in range(iterations):
        new = np.empty_like(q)
        for (y, x) in pix:
            energy = unary[:, y, x].copy()
            for (v, u) in pix:
                if (v, u) == (y, x):
                    continue
                dp = (y - v) ** 2 + (x - u) ** 2
                dc = float(np.sum((col[y, x] - col[v, u]) ** 2))
                kern = p.w1 * math.exp(-dp / (2 * p.sigma_alpha**2) - dc / (2 * p.sigma_beta**2))
                kern += p.w2 * math.exp(-dp / (2 * p.sigma_gamma**2))
                for lab in range(k):
                    energy[lab] += kern * (1.0 - q[lab, v, u])
            e = np.exp(-(energy - energy.min()))
            new[:, y, x] = e / e.sum()
        q = new
    return q


def test_unary_examples():
    probs = np.array([1.0, 0.5, 0.0, 0.5]).reshape(2, 1, 2)
    u = unary_from_probs(probs)
    assert u[0, 0, 0] == 0.0
    assert u[0, 0, 1] == pytest.approx(0.693147, abs=1e-6)
    assert u[1, 0, 0] == pytest.approx(18.4207, abs=1e-4)
    with pytest.raises(KindError):
        unary_from_probs(np.full((2, 1, 1), 0.9))


def test_two_pixel_hand_step():
    img = np.zeros((1, 2, 3), dtype=np.uint8)
    probs = np.array([[[0.9, 0.5]], [[0.1, 0.5]]])
    p = CrfParams(w1=1, w2=0, sigma_alpha=1, sigma_beta=1, iterations=1)
    out = mean_field_naive(img, probs, p)
    kern = math.exp(-0.5)
    p0 = 1.0 / (1.0 + math.exp(-0.8 * kern))
    assert out[:, 0, 0] == pytest.approx([0.9, 0.1], abs=1e-12)
    assert out[:, 0, 1] == pytest.approx([p0, 1 - p0], abs=1e-12)
    assert out[:, 0, 1] == pytest.approx([0.6190, 0.3810], abs=1e-3)


@pytest.mark.parametrize("params", [
    CrfParams(iterations=3),
    CrfParams(w1=2, w2=0.5, sigma_alpha=2, sigma_beta=40, sigma_gamma=1, iterations=4),
])
def test_naive_matches_loop_oracle(params, rng):
    img = random_image(rng, 3, 4)
    probs = random_probs(rng, 3, 3, 4)
    expected = loop_mean_field(img, probs, params, params.iterations)
    assert np.allclose(mean_field_naive(img, probs, params), expected, atol=1e-12)


def test_blocked_kernel_matches_dense(rng, monkeypatch):
    img = random_image(rng, 20, 30)
    probs = random_probs(rng, 4, 20, 30)
    dense = mean_field_naive(img, probs)
    monkeypatch.setattr(densecrf, "_DENSE_LIMIT", 0)
    monkeypatch.setattr(densecrf, "_BLOCK", 77)
    assert np.allclose(mean_field_naive(img, probs), dense, atol=1e-12)


@pytest.mark.parametrize("method", ["naive", "lattice"])
def test_zero_weights_is_identity(method, rng):
    img = random_image(rng, 9, 11)
    probs = random_probs(rng, 4, 9, 11)
    out = DenseCRF(img, CrfParams(w1=0, w2=0, iterations=7), method=method).infer(probs)
    assert np.abs(out - probs).max() <= 1e-6


def test_zero_iterations_returns_input(rng):
    img = random_image(rng, 4, 4)
    probs = random_probs(rng, 3, 4, 4, dtype=np.float32)
    for method in ("naive", "lattice"):
        out = DenseCRF(img, CrfParams(iterations=0), method=method).infer(probs)
        assert out.dtype == np.float32 and np.array_equal(out, probs)


@pytest.mark.parametrize("method", ["naive", "lattice"])
def test_output_is_a_distribution(method, rng):
    img = random_image(rng, 12, 10)
    probs = random_probs(rng, 3, 12, 10)
    for it in (1, 2, 5):
        out = DenseCRF(img, CrfParams(iterations=it), method=method).infer(probs)
        assert np.all(out >= 0)
        assert np.allclose(out.sum(axis=0), 1, atol=1e-5)


@pytest.mark.parametrize("method", ["naive", "lattice"])
def test_constant_scene_keeps_uniform_probs(method):
    img = np.full((10, 10, 3), 80, dtype=np.uint8)
    probs = np.full((3, 10, 10), 1 / 3)
    out = DenseCRF(img, CrfParams(), method=method).infer(probs)
    assert np.allclose(out, 1 / 3, atol=1e-12)


@pytest.mark.parametrize("method", ["naive", "lattice"])
def test_constant_scene_shared_winner(method):
    img = np.full((10, 10, 3), 80, dtype=np.uint8)
    probs = np.empty((3, 10, 10))
    probs[:] = np.array([0.2, 0.5, 0.3])[:, None, None]
    out = DenseCRF(img, CrfParams(), method=method).infer(probs)
    assert np.all(out.argmax(axis=0) == 1)


@settings(max_examples=10)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["naive", "lattice"]))
def test_class_permutation_equivariance(seed, method):
    r = np.random.default_rng(seed)
    img = random_image(r, 8, 8)
    probs = random_probs(r, 4, 8, 8)
    perm = r.permutation(4)
    crf = DenseCRF(img, CrfParams(iterations=5), method=method)
    assert np.allclose(crf.infer(probs[perm]), crf.infer(probs)[perm], atol=1e-12)


def test_lattice_messages_are_nonnegative(rng):
    img = random_image(rng, 16, 16)
    probs = random_probs(rng, 3, 16, 16)
    crf = DenseCRF(img, CrfParams(), method="lattice")
    assert np.all(crf.messages(probs.reshape(3, -1)) >= 0)


def test_lattice_tracks_naive_for_weak_pairwise(rng):
    # with light pairwise weights the mean-field map is contractive and the
    # filtering error stays small in the marginals
    p = CrfParams(w1=0.3, w2=0.1)
    img = random_image(rng, 24, 24)
    probs = random_probs(rng, 3, 24, 24)
    diff = np.abs(mean_field_lattice(img, probs, p) - mean_field_naive(img, probs, p)).max()
    assert diff < 0.3


def test_lattice_backends_agree(rng, backend):
    img = random_image(rng, 12, 12)
    probs = random_probs(rng, 3, 12, 12)
    ref = mean_field_lattice(img, probs, backend="python")
    assert np.array_equal(mean_field_lattice(img, probs, backend=backend), ref)


def test_dispatch(rng, monkeypatch):
    assert choose_method(64) == "naive"
    assert choose_method(4096) == "naive"
    assert choose_method(128 * 128) == "lattice"
    assert choose_method(1, cutoff=0) == "lattice"
    img = random_image(rng, 8, 8)
    probs = random_probs(rng, 3, 8, 8)
    assert np.array_equal(crf_refine(img, probs), mean_field_naive(img, probs))
    assert np.array_equal(crf_refine(img, probs, cutoff=0), mean_field_lattice(img, probs))
    seen = []
    monkeypatch.setattr(densecrf, "DenseCRF", lambda img, params, method: seen.append(method) or _Stub())
    crf_refine(np.zeros((128, 128, 3), np.uint8), np.full((2, 128, 128), 0.5))
    assert seen == ["lattice"]


class _Stub:
    def infer(self, probs):
        return probs


def test_shape_and_param_errors(rng):
    img = random_image(rng, 4, 5)
    with pytest.raises(DimensionMismatch):
        crf_refine(img, random_probs(rng, 2, 5, 4))
    with pytest.raises(ValueError):
        CrfParams(sigma_alpha=0)
    with pytest.raises(ValueError):
        CrfParams(w1=-1)
    with pytest.raises(ValueError):
        DenseCRF(img, method="exact")
    with pytest.raises(ConfigError):
        CrfParams.from_dict({"w3": 1})
    assert CrfParams.from_dict(CrfParams(w1=4).to_dict()) == CrfParams(w1=4)
