"""Synthetic lesion-like dataset for the desk-scale testbed.

Four geometrically distinct classes of bright blobs on a dark, lightly
textured background, 32x32 grayscale:

    0 small-round   one compact isotropic blob
    1 large-round   one wide isotropic blob
    2 elongated     one anisotropic blob at a random angle
    3 twin          two compact blobs separated by a clear gap

The classes differ in gross shape statistics (extent, anisotropy,
modality) rather than fine texture, so they remain separable after strong
smoothing while a pixel-space MLP is still easy to attack. Each image also
carries natural acquisition variation: random optical blur (exact for
Gaussian blobs: widths widen and peaks attenuate analytically), a random
sensor-noise level, a random background level, and for a fraction of
images a lower acquisition resolution (rendered through a down/up
resampling round trip). Models trained on the distribution therefore
tolerate the smoothing, contrast loss, and residual noise that heavy
purification introduces, the way classifiers trained on natural photos
do. Pixel values are quantized to the 8-bit grid at generation time,
making save/load via 8-bit image files lossless.

On disk a dataset is a directory of .pgm files plus labels.csv
("filename,label" rows) and meta.json (class names, split tag, dims).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .image import inverse_resize, load_image, project, resize, save_image
from .rng import RngState

CLASS_NAMES = ("small-round", "large-round", "elongated", "twin")
IMAGE_SIZE = 32


@dataclass(frozen=True)
class LabeledDataset:
    """Image stack with integer labels and split provenance."""

    images: np.ndarray  # (n, h, w, c) float64 in [0,1]
    labels: np.ndarray  # (n,) int64, < n_classes
    class_names: tuple[str, ...]
    split: str

    def __post_init__(self):
        if self.images.ndim != 4 or len(self.labels) != len(self.images):
            raise ValueError("images must be (n,h,w,c) with one label per image")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("labels out of range")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def __len__(self) -> int:
        return len(self.labels)


def _gaussian_blob(i, j, cy, cx, sy, sx, angle):
    co, si = np.cos(angle), np.sin(angle)
    u = (i - cy) * co + (j - cx) * si
    v = -(i - cy) * si + (j - cx) * co
    return np.exp(-0.5 * ((u / sy) ** 2 + (v / sx) ** 2))


# Per-image acquisition variation. Blur is applied analytically: convolving
# a Gaussian blob of width s with a Gaussian PSF of variance p2 yields a
# blob of width sqrt(s^2 + p2) whose peak shrinks by s^2/(s^2 + p2) per axis
# pair, so no convolution is ever evaluated.
_POSITION_JITTER = 3.2  # centre offset range, +- pixels
_BLUR_VARIANCE_MAX = 4.0  # optical PSF variance p2 ~ U[0, max], pixels^2
_NOISE_STD_MAX = 0.15  # sensor noise std ~ U[0, max]
_LOW_RES_HALF = 0.25  # fraction of images acquired at half resolution
_LOW_RES_QUARTER = 0.15  # ... and at quarter resolution


def _blurred_blob(i, j, cy, cx, sy, sx, angle, amp, p2):
    wy, wx = np.sqrt(sy * sy + p2), np.sqrt(sx * sx + p2)
    amp = amp * (sy * sx) / (wy * wx)
    return amp * _gaussian_blob(i, j, cy, cx, wy, wx, angle)


def _downsampled(img: np.ndarray, factor: Fraction) -> np.ndarray:
    dims = (img.shape[0], img.shape[1])
    return project(inverse_resize(resize(img, factor), factor, dims))


def _render(label: int, rng: RngState, n: int) -> np.ndarray:
    i, j = np.indices((n, n), dtype=np.float64)
    u = rng.uniform(16)
    pj = _POSITION_JITTER
    cy, cx = n / 2 - pj + 2 * pj * u[0], n / 2 - pj + 2 * pj * u[1]
    amp = 0.70 + 0.14 * u[2]
    p2 = _BLUR_VARIANCE_MAX * u[8]
    if label == 0:  # small-round
        s = 2.7 + 0.6 * u[3]
        img = _blurred_blob(i, j, cy, cx, s, s, 0.0, amp, p2)
    elif label == 1:  # large-round
        s = 4.0 + 0.6 * u[3]
        img = _blurred_blob(i, j, cy, cx, s, s, 0.0, amp, p2)
    elif label == 2:  # elongated
        s_major = 6.2 + 0.8 * u[3]
        s_minor = 2.5 + 0.5 * u[4]
        angle = np.pi * u[5]
        img = _blurred_blob(i, j, cy, cx, s_minor, s_major, angle, amp, p2)
    else:  # twin
        s1 = 2.7 + 0.6 * u[3]
        s2 = 2.7 + 0.6 * u[4]
        gap = 8.3 + 1.5 * u[5]
        angle = np.pi * u[6]
        dy, dx = 0.5 * gap * np.sin(angle), 0.5 * gap * np.cos(angle)
        cy = np.clip(cy, 2 + abs(dy), n - 2 - abs(dy))
        cx = np.clip(cx, 2 + abs(dx), n - 2 - abs(dx))
        img = _blurred_blob(i, j, cy - dy, cx - dx, s1, s1, 0.0, amp, p2)
        img = img + _blurred_blob(i, j, cy + dy, cx + dx, s2, s2, 0.0, amp, p2)
    background = 0.08 + 0.08 * u[7]
    noise = (_NOISE_STD_MAX * u[9]) * rng.normal(n * n).reshape(n, n)
    img = np.clip(background + noise + img, 0.0, 1.0)[:, :, None]
    if u[10] < _LOW_RES_HALF:
        img = _downsampled(img, Fraction(1, 2))
    elif u[10] < _LOW_RES_HALF + _LOW_RES_QUARTER:
        img = _downsampled(img, Fraction(1, 4))
    # snap to the 8-bit grid so file round trips are exact
    return np.round(img * 255.0) / 255.0


def generate_split(seed: int, count: int, split: str, size: int = IMAGE_SIZE) -> LabeledDataset:
    """Deterministic balanced split; item i has label i mod 4."""
    root = RngState(seed).child("dataset", split)
    images = np.empty((count, size, size, 1))
    labels = np.empty(count, dtype=np.int64)
    for idx in range(count):
        label = idx % len(CLASS_NAMES)
        images[idx] = _render(label, root.child(idx), size)
        labels[idx] = label
    return LabeledDataset(images=images, labels=labels, class_names=CLASS_NAMES, split=split)


def generate_dataset(seed: int, n_train: int = 2000, n_test: int = 400):
    """The standard train/test pair used by the testbed."""
    return generate_split(seed, n_train, "train"), generate_split(seed, n_test, "test")


def save_dataset(dataset: LabeledDataset, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for idx, (img, label) in enumerate(zip(dataset.images, dataset.labels)):
        name = f"{idx:05d}.pgm" if img.shape[2] == 1 else f"{idx:05d}.ppm"
        save_image(img, out_dir / name)
        rows.append((name, int(label)))
    with open(out_dir / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "label"])
        writer.writerows(rows)
    meta = {
        "class_names": list(dataset.class_names),
        "split": dataset.split,
        "count": len(dataset),
        "dims": list(dataset.images.shape[1:]),
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_dataset(in_dir) -> LabeledDataset:
    in_dir = Path(in_dir)
    meta = json.loads((in_dir / "meta.json").read_text())
    with open(in_dir / "labels.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["filename", "label"]:
            raise ValueError(f"unexpected labels.csv header: {header}")
        rows = [(name, int(label)) for name, label in reader]
    images = np.stack([load_image(in_dir / name) for name, _ in rows])
    labels = np.array([label for _, label in rows], dtype=np.int64)
    return LabeledDataset(
        images=images,
        labels=labels,
        class_names=tuple(meta["class_names"]),
        split=meta["split"],
    )
