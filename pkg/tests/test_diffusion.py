"""Tests for seeded Gaussian noise injection."""

import numpy as np
import pytest

from mdda.diffusion import NoiseConfig, diffuse_step, sample_gaussian_field
from mdda.rng import RngState


def test_noise_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(sigma2=-0.1, t_prime=3)
    with pytest.raises(ValueError):
        NoiseConfig(sigma2=0.1, t_prime=0)


def test_per_step_variance():
    assert NoiseConfig(sigma2=0.125, t_prime=5).step_variance == 0.025
    assert NoiseConfig(sigma2=0.125, t_prime=3).step_variance == pytest.approx(0.125 / 3)


def test_zero_variance_field_is_zero():
    field = sample_gaussian_field((8, 8, 1), 0.0, RngState(1))
    np.testing.assert_array_equal(field, np.zeros((8, 8, 1)))


def test_negative_variance_rejected():
    with pytest.raises(ValueError):
        sample_gaussian_field((2, 2, 1), -1.0, RngState(1))


def test_same_seed_same_field():
    a = sample_gaussian_field((16, 16, 3), 0.025, RngState(99))
    b = sample_gaussian_field((16, 16, 3), 0.025, RngState(99))
    np.testing.assert_array_equal(a, b)


def test_field_statistics():
    # standard errors at n=1e6: SE(mean)=1.6e-4, SE(var)~3.5e-5; thresholds
    # sit at >6 sigma so a correct sampler fails with negligible probability
    field = sample_gaussian_field((1000, 1000, 1), 0.025, RngState(12345))
    assert abs(field.mean()) <= 1e-3
    assert abs(field.var() - 0.025) <= 0.01 * 0.025


def test_step_variance_additivity():
    cfg = NoiseConfig(sigma2=0.125, t_prime=5)
    rng = RngState(777)
    total = np.zeros((1000, 1000, 1))
    for _ in range(cfg.t_prime):
        total += sample_gaussian_field(total.shape, cfg.step_variance, rng)
    assert abs(total.var() - 0.125) <= 0.02 * 0.125


def test_diffuse_step_zero_noise_is_identity():
    img = np.random.default_rng(0).uniform(size=(9, 9, 1))
    out = diffuse_step(img, NoiseConfig(sigma2=0.0, t_prime=4), RngState(3))
    np.testing.assert_array_equal(out, img)


def test_diffuse_step_adds_expected_field():
    img = np.random.default_rng(1).uniform(size=(6, 6, 1))
    cfg = NoiseConfig(sigma2=0.125, t_prime=5)
    out = diffuse_step(img, cfg, RngState(42))
    field = sample_gaussian_field(img.shape, cfg.step_variance, RngState(42))
    np.testing.assert_array_equal(out, img + field)


def test_diffuse_step_commutes_with_constant_shift():
    img = np.random.default_rng(2).uniform(size=(6, 6, 1))
    cfg = NoiseConfig(sigma2=0.125, t_prime=5)
    a = diffuse_step(img + 0.25, cfg, RngState(7))
    b = diffuse_step(img, cfg, RngState(7))
    np.testing.assert_allclose(a - b, 0.25, atol=1e-15)


def test_diffuse_step_mean_is_input():
    img = np.full((50, 50, 1), 0.5)
    cfg = NoiseConfig(sigma2=0.125, t_prime=5)
    rng = RngState(11)
    acc = np.zeros_like(img)
    n = 200
    for _ in range(n):
        acc += diffuse_step(img, cfg, rng) - img
    # mean of n*2500 samples of std 0.158: SE ~ 2.2e-4 per pixel-average
    assert abs(acc.mean() / n) <= 1e-3
