import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from PIL import Image

from wsscues import imagery
from wsscues.errors import (
    DecodeError,
    DTypeError,
    EncodeError,
    KindError,
    PaletteMismatch,
    ShapeError,
    UnsupportedFormat,
    ZeroDimension,
)


def test_load_single_red_pixel(tmp_path):
    path = tmp_path / "red.png"
    Image.new("RGB", (1, 1), (255, 0, 0)).save(path)
    img = imagery.load_image(str(path))
    assert img.shape == (1, 1, 3) and img.dtype == np.uint8
    assert img[0, 0].tolist() == [255, 0, 0]


def test_load_matches_bytes_written_by_pillow(tmp_path):
    data = np.array([[[1, 2, 3], [250, 128, 0]], [[0, 0, 0], [255, 255, 255]]], dtype=np.uint8)
    path = tmp_path / "px.png"
    Image.frombytes("RGB", (2, 2), data.tobytes()).save(path)
    assert np.array_equal(imagery.load_image(str(path)), data)


def test_rgba_and_gray_inputs_become_rgb(tmp_path):
    Image.new("RGBA", (3, 2), (10, 20, 30, 40)).save(tmp_path / "a.png")
    Image.new("L", (3, 2), 77).save(tmp_path / "l.png")
    assert imagery.load_image(str(tmp_path / "a.png"))[1, 2].tolist() == [10, 20, 30]
    assert imagery.load_image(str(tmp_path / "l.png"))[0, 0].tolist() == [77, 77, 77]


def test_load_errors(tmp_path):
    path = tmp_path / "ok.png"
    Image.new("RGB", (8, 8), (1, 2, 3)).save(path)
    raw = path.read_bytes()
    (tmp_path / "cut.png").write_bytes(raw[: len(raw) // 2])
    with pytest.raises(DecodeError):
        imagery.load_image(str(tmp_path / "cut.png"))
    with pytest.raises(FileNotFoundError):
        imagery.load_image(str(tmp_path / "missing.png"))
    Image.new("RGB", (2, 2)).save(tmp_path / "x.bmp")
    with pytest.raises(UnsupportedFormat):
        imagery.load_image(str(tmp_path / "x.bmp"))
    Image.new("I;16", (2, 2)).save(tmp_path / "deep.png")
    with pytest.raises(UnsupportedFormat):
        imagery.load_image(str(tmp_path / "deep.png"))


@pytest.mark.parametrize("rgb, gray", [((255, 255, 255), 255), ((255, 0, 0), 76), ((0, 0, 0), 0)])
def test_to_gray_examples(rgb, gray):
    img = np.array([[rgb]], dtype=np.uint8)
    assert imagery.to_gray(img)[0, 0] == gray


@given(hnp.arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6), st.just(3))))
def test_to_gray_idempotent_through_replication(img):
    g = imagery.to_gray(img)
    assert np.array_equal(imagery.to_gray(imagery.gray_to_rgb(g)), g)


def test_resize_examples():
    m = np.random.default_rng(0).random((2, 5, 7)).astype(np.float32)
    assert np.array_equal(imagery.resize_bilinear(m, 5, 7), m)
    const = np.full((1, 1, 1), 0.37, dtype=np.float32)
    assert np.all(imagery.resize_bilinear(const, 6, 9) == np.float32(0.37))
    col = np.array([[[0.0], [1.0]]], dtype=np.float32)
    out = imagery.resize_bilinear(col, 4, 1)
    assert np.allclose(out[0, :, 0], [0, 0.25, 0.75, 1])
    with pytest.raises(ZeroDimension):
        imagery.resize_bilinear(m, 0, 3)


@given(
    hnp.arrays(np.float32, st.tuples(st.integers(1, 3), st.integers(1, 6), st.integers(1, 6)),
               elements=st.floats(-10, 10, width=32)),
    st.integers(1, 12),
    st.integers(1, 12),
)
def test_resize_has_no_overshoot(m, oh, ow):
    out = imagery.resize_bilinear(m, oh, ow)
    lo = m.min(axis=(1, 2))[:, None, None]
    hi = m.max(axis=(1, 2))[:, None, None]
    assert np.all(out >= lo - 1e-5) and np.all(out <= hi + 1e-5)


def test_check_scoremap():
    with pytest.raises(ShapeError):
        imagery.check_scoremap(np.zeros((3, 3)))
    with pytest.raises(DTypeError):
        imagery.check_scoremap(np.zeros((1, 3, 3), dtype=np.int32))
    with pytest.raises(KindError):
        imagery.check_scoremap(np.full((2, 2, 2), 0.7), kind="probability")
    imagery.check_scoremap(np.full((2, 2, 2), 0.5), kind="probability")


def _npy_v1(shape, descr="<f4"):
    header = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape}, }}"
    pad = 16 - (10 + len(header) + 1) % 16
    header = header + " " * pad + "\n"
    assert (10 + len(header)) % 16 == 0
    return b"\x93NUMPY\x01\x00" + struct.pack("<H", len(header)) + header.encode("latin1")


def test_hand_written_npy_header(tmp_path):
    values = np.arange(24, dtype="<f4")
    path = tmp_path / "hand.npy"
    path.write_bytes(_npy_v1((2, 3, 4)) + values.tobytes())
    m = imagery.load_scoremap(str(path))
    assert m.shape == (2, 3, 4)
    assert np.array_equal(m.ravel(), values)


def test_written_npy_is_version_1(tmp_path):
    path = tmp_path / "s.npy"
    imagery.save_scoremap(np.zeros((1, 2, 2)), str(path))
    head = path.read_bytes()[:10]
    assert head[:8] == b"\x93NUMPY\x01\x00"
    assert (10 + struct.unpack("<H", head[8:10])[0]) % 16 == 0


def test_npy_contract_errors(tmp_path):
    np.save(tmp_path / "r2.npy", np.zeros((3, 3), dtype="<f4"))
    with pytest.raises(ShapeError):
        imagery.load_scoremap(str(tmp_path / "r2.npy"))
    np.save(tmp_path / "f8.npy", np.zeros((1, 3, 3)))
    with pytest.raises(DTypeError):
        imagery.load_scoremap(str(tmp_path / "f8.npy"))
    np.save(tmp_path / "c.npy", np.full((1, 2, 2), 3, dtype=np.uint8))
    with pytest.raises(DecodeError):
        imagery.load_cues(str(tmp_path / "c.npy"))


@given(st.data())
def test_round_trips(tmp_path_factory, data):
    d = tmp_path_factory.mktemp("rt")
    shape = data.draw(st.tuples(st.integers(1, 4), st.integers(1, 7), st.integers(1, 7)))
    scores = data.draw(hnp.arrays(np.float32, shape, elements=st.floats(0, 1, width=32)))
    cues = data.draw(hnp.arrays(np.uint8, shape, elements=st.integers(0, 1)))
    labels = data.draw(hnp.arrays(np.int32, shape[1:], elements=st.integers(0, 1000)))
    mask = data.draw(hnp.arrays(np.uint8, shape[1:], elements=st.sampled_from([0, 1, 5, 20, 255])))
    img = data.draw(hnp.arrays(np.uint8, shape[1:] + (3,)))
    imagery.save_scoremap(scores, str(d / "s.npy"))
    imagery.save_cues(cues, str(d / "c.npy"))
    imagery.save_labeling(labels, str(d / "l.npy"))
    imagery.save_mask_png(mask, str(d / "m.png"))
    imagery.save_image(img, str(d / "i.png"))
    assert np.array_equal(imagery.load_scoremap(str(d / "s.npy")), scores)
    assert np.array_equal(imagery.load_cues(str(d / "c.npy")), cues)
    assert np.array_equal(imagery.load_labeling(str(d / "l.npy")), labels)
    assert np.array_equal(imagery.load_mask_png(str(d / "m.png")), mask)
    assert np.array_equal(imagery.load_image(str(d / "i.png")), img)


def test_palette_entries():
    assert imagery.VOC_PALETTE[0].tolist() == [0, 0, 0]
    assert imagery.VOC_PALETTE[1].tolist() == [128, 0, 0]
    assert imagery.VOC_PALETTE[2].tolist() == [0, 128, 0]
    assert imagery.VOC_PALETTE[15].tolist() == [192, 128, 128]
    assert len({tuple(c) for c in imagery.VOC_PALETTE}) == 256


def test_mask_png_errors(tmp_path):
    with pytest.raises(EncodeError):
        imagery.save_mask_png(np.zeros((2, 2), dtype=np.float32), str(tmp_path / "f.png"))
    with pytest.raises(EncodeError):
        imagery.save_mask_png(np.full((2, 2), 300), str(tmp_path / "big.png"))
    Image.new("RGB", (2, 2)).save(tmp_path / "rgb.png")
    with pytest.raises(PaletteMismatch):
        imagery.load_mask_png(str(tmp_path / "rgb.png"))
    im = Image.fromarray(np.ones((2, 2), dtype=np.uint8), mode="P")
    im.putpalette([0, 0, 0, 1, 2, 3] + [0] * (254 * 3))
    im.save(tmp_path / "other.png")
    with pytest.raises(PaletteMismatch):
        imagery.load_mask_png(str(tmp_path / "other.png"))


def test_colorize():
    out = imagery.colorize(np.array([[0, 1], [255, 2]], dtype=np.uint8))
    assert out.shape == (2, 2, 3)
    assert out[0, 1].tolist() == [128, 0, 0]
    assert out[1, 0].tolist() == imagery.VOC_PALETTE[255].tolist()
