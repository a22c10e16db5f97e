"""Tests for image representation, resampling, projection, and file I/O."""

import numpy as np
import pytest

from mdda.image import (
    DimensionMismatchError,
    InvalidScaleError,
    UnsupportedFormatError,
    as_image,
    as_scale,
    inverse_resize,
    linf_distance,
    load_image,
    parse_scale,
    project,
    psnr,
    resize,
    save_image,
    scaled_dims,
)


def test_as_image_shapes():
    assert as_image(np.zeros((4, 5))).shape == (4, 5, 1)
    assert as_image(np.zeros((4, 5, 3))).shape == (4, 5, 3)
    for bad in (np.zeros(3), np.zeros((2, 2, 2)), np.zeros((0, 3, 1))):
        with pytest.raises(DimensionMismatchError):
            as_image(bad)


def test_as_scale_accepts_powers_of_two_only():
    assert as_scale(0.5) == as_scale("1/2")
    assert as_scale(2) == 2
    for bad in (0.3, 3, "2/3", 0, -1):
        with pytest.raises(InvalidScaleError):
            as_scale(bad)


def test_parse_scale():
    assert parse_scale("1/4") == as_scale(0.25)
    assert parse_scale("2") == 2
    with pytest.raises(InvalidScaleError):
        parse_scale("0.3")


def test_scaled_dims_requires_integer_grid():
    assert scaled_dims((16, 8), as_scale(0.5)) == (8, 4)
    with pytest.raises(InvalidScaleError):
        scaled_dims((6, 6), as_scale(0.25))


def test_resize_factor_one_is_exact_copy():
    img = np.random.default_rng(0).uniform(size=(5, 7, 3))
    out = resize(img, 1)
    np.testing.assert_array_equal(out, img)
    assert out is not img


def test_resize_constant_half():
    out = resize(np.full((2, 2, 1), 0.5), 0.5)
    assert out.shape == (1, 1, 1)
    assert out[0, 0, 0] == 0.5


def test_resize_constant_any_scale_both_methods():
    img = np.full((8, 8, 1), 0.37)
    for factor in (0.25, 0.5, 2, 4):
        out = resize(img, factor)
        np.testing.assert_allclose(out, 0.37, atol=1e-12)


def test_nearest_downsample_index_mapping():
    # pixel (i,j) = (4i+j)/16; factor 1/2 keeps source indices {0,2}x{0,2}
    img = (np.arange(16).reshape(4, 4) / 16.0)[:, :, None]
    out = resize(img, 0.5)
    want = np.array([[0, 2], [8, 10]]) / 16.0
    np.testing.assert_array_equal(out[:, :, 0], want)


def test_nearest_downsample_values_come_from_input():
    rng = np.random.default_rng(1)
    img = rng.uniform(size=(8, 8, 1))
    out = resize(img, 0.25)
    assert set(out.ravel()).issubset(set(img.ravel()))


def test_resize_rejects_fractional_output_dims():
    with pytest.raises(InvalidScaleError):
        resize(np.zeros((6, 6, 1)), 0.25)


def test_inverse_resize_identity_and_constant():
    img = np.random.default_rng(2).uniform(size=(6, 6, 1))
    np.testing.assert_array_equal(inverse_resize(img, 1, (6, 6)), img)
    const = np.full((3, 3, 1), 0.7)
    np.testing.assert_allclose(inverse_resize(const, 0.5, (6, 6)), 0.7, atol=1e-12)


def test_inverse_resize_checks_dims():
    with pytest.raises(InvalidScaleError):
        inverse_resize(np.zeros((3, 3, 1)), 0.5, (8, 8))


def test_gradient_round_trip_error_is_small():
    i, j = np.indices((16, 16))
    grad = ((i + j) / 30.0)[:, :, None]
    back = inverse_resize(resize(grad, 0.5), 0.5, (16, 16))
    assert linf_distance(back, grad) <= 0.085


def test_bicubic_upsample_reproduces_linear_ramp_interior():
    ramp = (np.arange(8) / 7.0).reshape(1, 8, 1) * np.ones((8, 1, 1))
    up = resize(ramp, 2)
    coords = (np.arange(16) + 0.5) * 0.5 - 0.5
    np.testing.assert_allclose(up[4, 3:13, 0], coords[3:13] / 7.0, atol=1e-12)


def test_project_clamps_and_is_idempotent():
    img = np.array([[-0.2, 0.5, 1.3]])
    out = project(img)
    np.testing.assert_array_equal(out[0, :, 0], [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(project(out), out)


def test_linf_distance_trivia_and_oracle():
    rng = np.random.default_rng(3)
    a = rng.uniform(size=(5, 5, 1))
    assert linf_distance(a, a) == 0.0
    assert linf_distance(a, a + 2 / 255) == pytest.approx(2 / 255, abs=1e-15)
    b = rng.uniform(size=(5, 5, 1))
    brute = max(abs(x - y) for x, y in zip(a.ravel(), b.ravel()))
    assert linf_distance(a, b) == brute


def test_linf_distance_metric_axioms():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a, b, c = rng.uniform(size=(3, 4, 4, 1))
        assert linf_distance(a, b) == linf_distance(b, a)
        assert linf_distance(a, c) <= linf_distance(a, b) + linf_distance(b, c) + 1e-15
    with pytest.raises(DimensionMismatchError):
        linf_distance(np.zeros((2, 2)), np.zeros((3, 2)))


def test_psnr():
    img = np.random.default_rng(5).uniform(size=(4, 4, 1))
    assert psnr(img, img) == np.inf
    assert psnr(img + 0.1, img) == pytest.approx(20.0, abs=1e-9)


@pytest.mark.parametrize("suffix,channels", [(".png", 1), (".png", 3), (".pgm", 1), (".ppm", 3)])
def test_image_file_round_trip(tmp_path, suffix, channels):
    rng = np.random.default_rng(6)
    # quantized image: exact byte round trip expected
    img = np.round(rng.uniform(size=(5, 4, channels)) * 255) / 255.0
    path = tmp_path / f"img{suffix}"
    save_image(img, path)
    loaded = load_image(path)
    np.testing.assert_array_equal(loaded, img)
    # saving again produces a bit-identical file
    second = tmp_path / f"img2{suffix}"
    save_image(loaded, second)
    assert second.read_bytes() == path.read_bytes()


def test_image_file_quantization_error_bound(tmp_path):
    img = np.random.default_rng(7).uniform(size=(6, 6, 3))
    path = tmp_path / "q.png"
    save_image(img, path)
    assert linf_distance(load_image(path), img) <= 1 / 510 + 1e-12


def test_image_extreme_values_map_to_unit_range(tmp_path):
    img = np.array([[0.0, 1.0]])[:, :, None]
    path = tmp_path / "e.pgm"
    save_image(img, path)
    out = load_image(path)
    np.testing.assert_array_equal(out[0, :, 0], [0.0, 1.0])


def test_image_io_format_errors(tmp_path):
    with pytest.raises(UnsupportedFormatError):
        save_image(np.zeros((2, 2, 1)), tmp_path / "x.bmp")
    with pytest.raises(UnsupportedFormatError):
        save_image(np.zeros((2, 2, 3)), tmp_path / "x.pgm")  # pgm is single-channel
    with pytest.raises(UnsupportedFormatError):
        save_image(np.zeros((2, 2, 1)), tmp_path / "x.ppm")  # ppm is three-channel
    with pytest.raises(UnsupportedFormatError):
        load_image(tmp_path / "missing.bmp")
