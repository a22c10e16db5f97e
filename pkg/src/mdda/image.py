"""Image values, power-of-two resampling, range projection, and file I/O.

Images are float64 arrays of shape (height, width, channels) with channels
1 or 3 and values nominally in [0, 1]. Mid-pipeline values may leave that
range; ``project`` clamps them back.

Resampling conventions, fixed so results are bit-reproducible:

* scale factors are powers of two, held exactly as ``fractions.Fraction``;
* downsampling is nearest neighbour with source index
  ``floor(dest_index / factor)`` (exact integer arithmetic);
* upsampling is separable bicubic with the Keys kernel (a = -0.5,
  Catmull-Rom), pixel centers aligned, reflected edges, and per-tap weight
  normalisation.
"""

from __future__ import annotations

import math
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image as PILImage


class InvalidScaleError(ValueError):
    """Scale factor is not usable for the requested image dimensions."""


class DimensionMismatchError(ValueError):
    """Operands do not share the required dimensions."""


class UnsupportedFormatError(ValueError):
    """Image file format outside the supported 8-bit PNG/PGM/PPM set."""


def as_image(arr, copy: bool = False) -> np.ndarray:
    """Coerce to a (H, W, C) float64 image array, C in {1, 3}."""
    img = np.array(arr, dtype=np.float64, copy=copy) if copy else np.asarray(arr, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise DimensionMismatchError(f"expected (H, W, 1|3) image, got shape {np.shape(arr)}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DimensionMismatchError(f"empty image: shape {img.shape}")
    return img


def as_scale(value) -> Fraction:
    """Validate a power-of-two scale factor, returned as an exact Fraction."""
    factor = Fraction(value)
    if factor <= 0:
        raise InvalidScaleError(f"scale must be positive, got {value!r}")
    num, den = factor.numerator, factor.denominator
    pow2 = lambda n: n & (n - 1) == 0
    if not ((den == 1 and pow2(num)) or (num == 1 and pow2(den))):
        raise InvalidScaleError(f"scale must be a power of two, got {value!r}")
    return factor


def parse_scale(text: str) -> Fraction:
    """Parse a scale like '1/4', '2', or '0.25'."""
    return as_scale(Fraction(text.strip()))


def scaled_dims(dims: tuple[int, int], factor: Fraction) -> tuple[int, int]:
    """Exact scaled (height, width); raises if either is non-integral."""
    out = []
    for d in dims:
        v = factor * d
        if v.denominator != 1 or v.numerator < 1:
            raise InvalidScaleError(f"scale {factor} of dims {dims} is not a positive integer grid")
        out.append(v.numerator)
    return out[0], out[1]


def _reflect_indices(idx: np.ndarray, n: int) -> np.ndarray:
    # mirror without repeating the edge sample: -1 -> 1, n -> n-2
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n - 2
    idx = np.abs(idx) % period
    return np.where(idx >= n, period - idx, idx)


def _cubic_weights(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Keys kernel weights for the four taps around fractional offset t."""
    w = np.empty((4,) + t.shape)
    s = 1.0 + t
    w[0] = ((a * s - 5.0 * a) * s + 8.0 * a) * s - 4.0 * a
    w[1] = ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    s = 1.0 - t
    w[2] = ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0
    s = 2.0 - t
    w[3] = ((a * s - 5.0 * a) * s + 8.0 * a) * s - 4.0 * a
    w /= w.sum(axis=0)
    return w


def _bicubic_axis(img: np.ndarray, m: int, axis: int) -> np.ndarray:
    n = img.shape[axis]
    x = (np.arange(m) + 0.5) * (n / m) - 0.5
    base = np.floor(x).astype(np.int64)
    w = _cubic_weights(x - base)
    moved = np.moveaxis(img, axis, 0)
    out = np.zeros((m,) + moved.shape[1:])
    for tap in range(4):
        src = _reflect_indices(base + tap - 1, n)
        out += w[tap].reshape((m,) + (1,) * (moved.ndim - 1)) * moved[src]
    return np.moveaxis(out, 0, axis)


def _nearest_axis(img: np.ndarray, m: int, factor: Fraction, axis: int) -> np.ndarray:
    # source index = floor(dest / factor), computed exactly
    p, q = factor.numerator, factor.denominator
    src = np.array([(i * q) // p for i in range(m)], dtype=np.int64)
    return np.take(img, src, axis=axis)


def resize(img, factor) -> np.ndarray:
    """Resample by a power-of-two factor: nearest below 1, bicubic above."""
    img = as_image(img)
    factor = as_scale(factor)
    if factor == 1:
        return img.copy()
    h, w = scaled_dims((img.shape[0], img.shape[1]), factor)
    if factor < 1:
        out = _nearest_axis(img, h, factor, axis=0)
        return _nearest_axis(out, w, factor, axis=1)
    out = _bicubic_axis(img, h, axis=0)
    return _bicubic_axis(out, w, axis=1)


def inverse_resize(img, factor, original_dims: tuple[int, int]) -> np.ndarray:
    """Map an image produced at ``factor`` back to ``original_dims``."""
    img = as_image(img)
    factor = as_scale(factor)
    expected = scaled_dims(original_dims, factor)
    if (img.shape[0], img.shape[1]) != expected:
        raise InvalidScaleError(
            f"image dims {img.shape[:2]} do not match scale {factor} of {original_dims}"
        )
    return resize(img, 1 / factor)


def project(img) -> np.ndarray:
    """Clamp every element to the valid range [0, 1]."""
    return np.clip(as_image(img), 0.0, 1.0)


def linf_distance(a, b) -> float:
    """Max absolute per-element difference."""
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.max(np.abs(a - b)))


def psnr(img, reference) -> float:
    """Peak signal-to-noise ratio in dB against a [0, 1]-range reference."""
    img, reference = as_image(img), as_image(reference)
    if img.shape != reference.shape:
        raise DimensionMismatchError(f"shape mismatch: {img.shape} vs {reference.shape}")
    mse = float(np.mean((img - reference) ** 2))
    return math.inf if mse == 0.0 else 10.0 * math.log10(1.0 / mse)


_SUFFIXES = {".png", ".pgm", ".ppm"}


def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG/PGM/PPM file into a [0, 1] float image."""
    path = Path(path)
    if path.suffix.lower() not in _SUFFIXES:
        raise UnsupportedFormatError(f"unsupported image extension: {path.name}")
    with PILImage.open(path) as im:
        if im.mode not in ("L", "RGB"):
            raise UnsupportedFormatError(f"unsupported image mode {im.mode!r} in {path.name}")
        data = np.asarray(im, dtype=np.float64) / 255.0
    return as_image(data)


def save_image(img, path) -> None:
    """Write as 8-bit PNG/PGM/PPM; values are clamped then rounded half-to-even."""
    img = as_image(img)
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in _SUFFIXES:
        raise UnsupportedFormatError(f"unsupported image extension: {path.name}")
    channels = img.shape[2]
    if (suffix == ".pgm" and channels != 1) or (suffix == ".ppm" and channels != 3):
        raise UnsupportedFormatError(f"{suffix} requires {'1' if suffix == '.pgm' else '3'} channel(s)")
    quantized = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    if channels == 1:
        PILImage.fromarray(quantized[:, :, 0], mode="L").save(path)
    else:
        PILImage.fromarray(quantized, mode="RGB").save(path)
