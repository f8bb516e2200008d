import numpy as np
import pytest

from e2eve.errors import ShapeError
from e2eve.imageops import (
    Image,
    area_resize,
    decode_mask_png,
    decode_png,
    encode_mask_png,
    encode_png,
    from_uint8,
    to_uint8,
)


from oracles import naive_area_resize


def test_same_size_is_copy():
    x = np.random.default_rng(0).random((3, 8, 8), dtype=np.float32)
    y = area_resize(x, (8, 8))
    assert np.array_equal(x, y)
    assert y is not x


def test_integer_upscale_replicates_exactly():
    x = np.random.default_rng(1).random((3, 5, 7), dtype=np.float32)
    y = area_resize(x, (10, 14))
    assert np.array_equal(y, np.repeat(np.repeat(x, 2, axis=1), 2, axis=2))


def test_integer_up_down_roundtrip_exact():
    x = np.random.default_rng(2).random((3, 16, 16), dtype=np.float32)
    assert np.array_equal(area_resize(area_resize(x, (32, 32)), (16, 16)), x)
    assert np.array_equal(area_resize(area_resize(x, (48, 48)), (16, 16)), x)


def test_matches_naive_oracle():
    rng = np.random.default_rng(3)
    for out in [(4, 4), (7, 5), (16, 16), (3, 11)]:
        x = rng.random((3, 12, 10), dtype=np.float32)
        got = area_resize(x, out).astype(np.float64)
        want = naive_area_resize(x.astype(np.float64), out)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_mean_preserved():
    x = np.random.default_rng(4).random((3, 24, 24), dtype=np.float32)
    y = area_resize(x, (6, 6))
    assert abs(float(x.mean(dtype=np.float64)) - float(y.mean(dtype=np.float64))) < 1e-6


def test_bad_output_size():
    with pytest.raises(ShapeError):
        area_resize(np.zeros((3, 4, 4), dtype=np.float32), (0, 4))


def test_uint8_roundtrip():
    arr = np.random.default_rng(5).integers(0, 256, (9, 9, 3)).astype(np.uint8)
    assert np.array_equal(to_uint8(from_uint8(arr)), arr)


def test_png_roundtrip():
    px = from_uint8(np.random.default_rng(6).integers(0, 256, (12, 12, 3)).astype(np.uint8))
    assert np.array_equal(decode_png(encode_png(px)), px)


def test_mask_png_roundtrip():
    mask = (np.random.default_rng(7).random((20, 20)) > 0.5).astype(np.uint8)
    assert np.array_equal(decode_mask_png(encode_mask_png(mask)), mask)


def test_image_validates_shape():
    with pytest.raises(ShapeError):
        Image(pixels=np.zeros((4, 4)))
