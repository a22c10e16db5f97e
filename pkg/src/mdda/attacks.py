"""White-box gradient attacks against any model exposing input gradients.

All attacks are pure per (image, config, stream): the sign attacks keep an
explicit perturbation ``delta`` clipped to the L-infinity ball so the
budget holds exactly, and the box constraint [0,1] is enforced by
projection at every step.

The margin attack minimises ||x'-x||^2 + lambda * max(margin, 0) by plain
projected gradient descent on the pixels. ``cw_margin`` picks the margin:
"canonical" uses f_y - max_{j!=y} f_j (any misclassification zeroes the
hinge), "below_all" uses f_y - min_{j!=y} f_j (keeps pushing until the
true logit sits below every other class).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import as_image, project
from .model import forward, input_gradient_from_dlogits, loss_and_input_gradient, predict
from .rng import RngState

METHODS = ("fgsm", "bim", "pgd", "cw")


@dataclass(frozen=True)
class AttackConfig:
    """Attack method plus every knob any of the methods needs."""

    method: str
    epsilon: float = 2 / 255
    steps: int = 100
    step_size: float | None = None  # default 2.5 * epsilon / steps
    cw_lambda: float = 1.0
    cw_lr: float = 0.01
    cw_margin: str = "canonical"
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown attack method: {self.method!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0,1], got {self.epsilon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.step_size is None:
            object.__setattr__(self, "step_size", 2.5 * self.epsilon / self.steps)
        elif self.step_size <= 0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        if self.method in ("bim", "pgd") and self.steps * self.step_size < self.epsilon:
            raise ValueError("steps * step_size must reach epsilon for iterative attacks")
        if self.cw_lambda < 0 or self.cw_lr <= 0:
            raise ValueError("cw_lambda must be >= 0 and cw_lr > 0")
        if self.cw_margin not in ("canonical", "below_all"):
            raise ValueError(f"cw_margin must be 'canonical' or 'below_all', got {self.cw_margin!r}")


def fgsm(model, img, label: int, epsilon: float) -> np.ndarray:
    """Single signed-gradient step of size epsilon, projected to [0,1]."""
    img = as_image(img)
    _, grad = loss_and_input_gradient(model, img, label)
    return project(img + epsilon * np.sign(grad))


def iterative_attack(model, img, label: int, cfg: AttackConfig, rng: RngState | None = None) -> np.ndarray:
    """Multi-step signed-gradient ascent (bim: zero start; pgd: random start).

    The perturbation is tracked explicitly and clipped to [-eps, eps] after
    every step, so the final L-infinity budget holds exactly; the iterate
    itself is re-projected into [0,1] before each gradient evaluation.
    """
    if cfg.method not in ("bim", "pgd"):
        raise ValueError(f"iterative_attack handles bim/pgd, not {cfg.method!r}")
    x0 = as_image(img)
    if cfg.method == "pgd":
        if rng is None:
            rng = RngState(cfg.seed)
        u = rng.uniform(x0.size).reshape(x0.shape)
        delta = cfg.epsilon * (2.0 * u - 1.0)
    else:
        delta = np.zeros_like(x0)
    for _ in range(cfg.steps):
        x = np.clip(x0 + delta, 0.0, 1.0)
        _, grad = loss_and_input_gradient(model, x, label)
        delta = np.clip(delta + cfg.step_size * np.sign(grad), -cfg.epsilon, cfg.epsilon)
    return np.clip(x0 + delta, 0.0, 1.0)


def _cw_margin_terms(logits: np.ndarray, label: int, kind: str):
    others = np.delete(logits, label)
    if kind == "canonical":
        rival_off = int(np.argmax(others))
    else:
        rival_off = int(np.argmin(others))
    rival = rival_off + (rival_off >= label)
    return float(logits[label] - logits[rival]), rival


def cw_attack(model, img, label: int, cfg: AttackConfig) -> np.ndarray:
    """Margin attack: projected gradient descent on distance + hinge.

    Returns the lowest-objective misclassified iterate seen, or the final
    iterate if none was misclassified.
    """
    if cfg.method != "cw":
        raise ValueError(f"cw_attack requires method 'cw', not {cfg.method!r}")
    x0 = as_image(img)
    x = x0.copy()
    best = None
    best_obj = np.inf
    for _ in range(cfg.steps):
        logits = forward(model, x)
        margin, rival = _cw_margin_terms(logits, label, cfg.cw_margin)
        dist2 = float(np.sum((x - x0) ** 2))
        objective = dist2 + cfg.cw_lambda * max(margin, 0.0)
        if int(np.argmax(logits)) != label and objective < best_obj:
            best, best_obj = x.copy(), objective
        grad = 2.0 * (x - x0)
        if cfg.cw_lambda > 0 and margin > 0:
            dlogits = np.zeros_like(logits)
            dlogits[label] = cfg.cw_lambda
            dlogits[rival] = -cfg.cw_lambda
            grad = grad + input_gradient_from_dlogits(model, x, dlogits)
        x = np.clip(x - cfg.cw_lr * grad, 0.0, 1.0)
    if int(np.argmax(forward(model, x))) != label:
        dist2 = float(np.sum((x - x0) ** 2))
        margin, _ = _cw_margin_terms(forward(model, x), label, cfg.cw_margin)
        objective = dist2 + cfg.cw_lambda * max(margin, 0.0)
        if objective < best_obj:
            best = x
    return best if best is not None else x


def attack_image(model, img, label: int, cfg: AttackConfig, rng: RngState | None = None) -> np.ndarray:
    """Dispatch one image to the configured attack."""
    if cfg.method == "fgsm":
        return fgsm(model, img, label, cfg.epsilon)
    if cfg.method in ("bim", "pgd"):
        return iterative_attack(model, img, label, cfg, rng)
    return cw_attack(model, img, label, cfg)
