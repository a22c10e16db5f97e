"""Flat ``key = value`` run configuration shared by the CLI subcommands.

One namespace-dotted key per line; ``#`` starts a comment; blank lines are
ignored. Numbers may be decimals or exact fractions ("6/255"), seeds may be
decimal or hex ("0x1234"), list values are comma-separated, and optional
values accept "auto" (derive) or "none" (disable). Unknown keys are errors,
so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

from .attacks import METHODS, AttackConfig
from .baselines import BdrConfig
from .model import TrainConfig
from .pipeline import DEFAULT_SCALES, MddaConfig


class ConfigError(ValueError):
    """A config line that cannot be parsed or validated."""


def _parse_int(text: str) -> int:
    return int(text, 0)  # accepts decimal and 0x-prefixed hex


def _parse_number(text: str) -> float:
    """Decimal or exact fraction, e.g. '0.125' or '6/255'."""
    return float(Fraction(text))


def _parse_int_list(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(_parse_int(part.strip()) for part in text.split(","))


def _parse_number_list(text: str) -> tuple:
    return tuple(_parse_number(part.strip()) for part in text.split(","))


def _parse_scales(text: str) -> tuple:
    return tuple(Fraction(part.strip()) for part in text.split(","))


def _optional(parser):
    def parse(text: str):
        if text.strip().lower() in ("auto", "none", "all", ""):
            return None
        return parser(text)

    return parse


def _parse_name(text: str) -> str:
    return text.strip().lower()


# key -> (default value, parser)
SCHEMA = {
    "data.seed": (0, _parse_int),
    "data.n_train": (2000, _parse_int),
    "data.n_test": (400, _parse_int),
    "model.hidden_sizes": ((64,), _parse_int_list),
    "model.epochs": (30, _parse_int),
    "model.batch_size": (32, _parse_int),
    "model.learning_rate": (0.1, _parse_number),
    "model.seed": (0, _parse_int),
    "attack.method": ("pgd", _parse_name),
    "attack.epsilon": (2 / 255, _parse_number),
    "attack.steps": (100, _parse_int),
    "attack.step_size": (None, _optional(_parse_number)),
    "attack.cw_lambda": (1.0, _parse_number),
    "attack.cw_lr": (0.01, _parse_number),
    "attack.cw_margin": ("canonical", _parse_name),
    "attack.seed": (0, _parse_int),
    "defense.method": ("mdda", _parse_name),
    "defense.sigma2": (0.125, _parse_number),
    "defense.n_blocks": (3, _parse_int),
    "defense.gamma": (None, _optional(_parse_number)),
    "defense.scales": (DEFAULT_SCALES, _parse_scales),
    "defense.seed": (1, _parse_int),
    "defense.bits": (3, _parse_int),
    "defense.tv_penalty": (None, _optional(_parse_number)),
    "defense.tv_tol": (1e-5, _parse_number),
    "defense.tv_max_outer_iters": (100, _parse_int),
    "defense.tv_gauss_seidel_sweeps": (2, _parse_int),
    "sweep.sigma2": ((0.05, 0.075, 0.1, 0.125, 0.15, 0.175), _parse_number_list),
    "sweep.n_blocks": ((1, 2, 3, 4, 5, 6, 7), _parse_int_list),
    "eval.n_images": (None, _optional(_parse_int)),
}


def default_config() -> dict:
    return {key: default for key, (default, _) in SCHEMA.items()}


def set_key(cfg: dict, key: str, text: str, where: str = "") -> None:
    """Parse one key=value assignment into cfg, in place."""
    if key not in SCHEMA:
        raise ConfigError(f"{where}unknown config key {key!r}")
    _, parser = SCHEMA[key]
    try:
        cfg[key] = parser(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}bad value for {key}: {text.strip()!r} ({exc})") from exc


def parse_config_text(text: str, cfg: dict | None = None) -> dict:
    cfg = default_config() if cfg is None else dict(cfg)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        set_key(cfg, key.strip(), value, where=f"line {lineno}: ")
    return cfg


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text())


def apply_overrides(cfg: dict, pairs) -> dict:
    """Apply command-line 'key=value' overrides on top of cfg."""
    cfg = dict(cfg)
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must be key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        set_key(cfg, key.strip(), value, where="override: ")
    return cfg


def apply_master_seed(cfg: dict, seed: int) -> dict:
    """One master seed pins data, training, attack, and defense streams.

    The defense gets its own offset stream so purification noise never
    aliases the attack's random starts.
    """
    cfg = dict(cfg)
    cfg["data.seed"] = seed
    cfg["model.seed"] = seed
    cfg["attack.seed"] = seed
    cfg["defense.seed"] = seed + 1
    return cfg


def build_train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        hidden_sizes=tuple(cfg["model.hidden_sizes"]),
        epochs=cfg["model.epochs"],
        batch_size=cfg["model.batch_size"],
        learning_rate=cfg["model.learning_rate"],
        seed=cfg["model.seed"],
    )


def build_attack_config(cfg: dict):
    """AttackConfig from the attack.* keys, or None when disabled."""
    method = cfg["attack.method"]
    if method == "none":
        return None
    if method not in METHODS:
        raise ConfigError(f"attack.method must be one of {METHODS} or 'none', got {method!r}")
    try:
        return AttackConfig(
            method=method,
            epsilon=cfg["attack.epsilon"],
            steps=cfg["attack.steps"],
            step_size=cfg["attack.step_size"],
            cw_lambda=cfg["attack.cw_lambda"],
            cw_lr=cfg["attack.cw_lr"],
            cw_margin=cfg["attack.cw_margin"],
            seed=cfg["attack.seed"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_defense_config(cfg: dict):
    """MddaConfig/BdrConfig from the defense.* keys, or None when disabled."""
    method = cfg["defense.method"]
    if method == "none":
        return None
    try:
        if method == "bdr":
            return BdrConfig(bits=cfg["defense.bits"])
        if method == "mdda":
            tv_kwargs = {
                "tol": cfg["defense.tv_tol"],
                "max_outer_iters": cfg["defense.tv_max_outer_iters"],
                "gauss_seidel_sweeps": cfg["defense.tv_gauss_seidel_sweeps"],
            }
            if cfg["defense.tv_penalty"] is not None:
                tv_kwargs["penalty"] = cfg["defense.tv_penalty"]
            return MddaConfig.create(
                sigma2=cfg["defense.sigma2"],
                n_blocks=cfg["defense.n_blocks"],
                scales=cfg["defense.scales"],
                gamma=cfg["defense.gamma"],
                seed=cfg["defense.seed"],
                **tv_kwargs,
            )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"defense.method must be 'mdda', 'bdr', or 'none', got {method!r}")
