"""Training-free baseline defense: bit-depth reduction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import as_image, project


@dataclass(frozen=True)
class BdrConfig:
    """Number of retained bits per channel."""

    bits: int = 3

    def __post_init__(self):
        if not 1 <= int(self.bits) <= 8:
            raise ValueError(f"bits must be in [1,8], got {self.bits}")


def bit_depth_reduce(img, bits: int = 3) -> np.ndarray:
    """Quantize to 2^bits levels, round half up; idempotent on its output."""
    BdrConfig(bits=bits)
    levels = float(2**bits - 1)
    img = project(as_image(img))
    return np.floor(img * levels + 0.5) / levels
