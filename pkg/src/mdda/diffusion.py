"""Seeded isotropic Gaussian noise injection, one small step at a time.

A full generative diffusion would run hundreds of steps with a schedule;
here the process is truncated to ``t_prime`` steps of unscaled additive
noise with per-step variance ``sigma2 / t_prime``, which is all the defense
needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import as_image
from .rng import RngState


@dataclass(frozen=True)
class NoiseConfig:
    """Total noise variance, truncated step count, and the stream seed."""

    sigma2: float
    t_prime: int
    seed: int = 0

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        if self.t_prime < 1:
            raise ValueError(f"t_prime must be >= 1, got {self.t_prime}")

    @property
    def step_variance(self) -> float:
        return self.sigma2 / self.t_prime


def sample_gaussian_field(dims: tuple[int, ...], variance: float, rng: RngState) -> np.ndarray:
    """I.i.d. N(0, variance) field of the given shape; advances ``rng``."""
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    n = int(np.prod(dims))
    return (np.sqrt(variance) * rng.normal(n)).reshape(dims)


def diffuse_step(img, cfg: NoiseConfig, rng: RngState) -> np.ndarray:
    """Add one step of noise, variance sigma2/t_prime; output is unclamped."""
    img = as_image(img)
    return img + sample_gaussian_field(img.shape, cfg.step_variance, rng)
