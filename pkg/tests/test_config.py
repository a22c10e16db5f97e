"""Tests for the flat key=value configuration schema."""

from fractions import Fraction

import pytest

from mdda.attacks import AttackConfig
from mdda.baselines import BdrConfig
from mdda.config import (
    ConfigError,
    apply_master_seed,
    apply_overrides,
    build_attack_config,
    build_defense_config,
    build_train_config,
    default_config,
    parse_config_text,
)
from mdda.pipeline import MddaConfig, default_gamma


def test_defaults_build_valid_objects():
    cfg = default_config()
    assert isinstance(build_attack_config(cfg), AttackConfig)
    assert isinstance(build_defense_config(cfg), MddaConfig)
    build_train_config(cfg)


def test_parse_comments_blanks_and_values():
    cfg = parse_config_text("""
# full line comment
attack.method = fgsm   # trailing comment
attack.epsilon = 6/255
data.seed = 0x10
model.hidden_sizes = 32, 16
defense.scales = 1/2, 1, 2
eval.n_images = all
defense.gamma = auto
""")
    assert cfg["attack.method"] == "fgsm"
    assert cfg["attack.epsilon"] == pytest.approx(6 / 255)
    assert cfg["data.seed"] == 16
    assert cfg["model.hidden_sizes"] == (32, 16)
    assert cfg["defense.scales"] == (Fraction(1, 2), Fraction(1), Fraction(2))
    assert cfg["eval.n_images"] is None
    assert cfg["defense.gamma"] is None


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("\nnot a key value line\n")
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config_text("no.such.key = 1\n")
    with pytest.raises(ConfigError, match="bad value"):
        parse_config_text("attack.epsilon = banana\n")
    with pytest.raises(ConfigError, match="bad value"):
        parse_config_text("attack.epsilon = 1/0\n")


def test_overrides_and_master_seed():
    cfg = apply_overrides(default_config(), ["attack.steps=7", "defense.bits=5"])
    assert cfg["attack.steps"] == 7 and cfg["defense.bits"] == 5
    with pytest.raises(ConfigError):
        apply_overrides(cfg, ["attack.steps"])
    seeded = apply_master_seed(cfg, 9)
    assert seeded["data.seed"] == 9
    assert seeded["model.seed"] == 9
    assert seeded["attack.seed"] == 9
    assert seeded["defense.seed"] == 10


def test_build_attack_variants():
    cfg = dict(default_config())
    cfg["attack.method"] = "none"
    assert build_attack_config(cfg) is None
    cfg["attack.method"] = "cw"
    cfg["attack.cw_margin"] = "below_all"
    attack = build_attack_config(cfg)
    assert attack.method == "cw" and attack.cw_margin == "below_all"
    cfg["attack.steps"] = 0
    with pytest.raises(ConfigError):
        build_attack_config(cfg)


def test_build_defense_variants():
    cfg = dict(default_config())
    assert isinstance(build_defense_config(cfg), MddaConfig)
    mdda_cfg = build_defense_config(cfg)
    assert mdda_cfg.tv.gamma == pytest.approx(default_gamma(0.125, 3))
    assert mdda_cfg.seed == 1
    cfg["defense.method"] = "bdr"
    assert isinstance(build_defense_config(cfg), BdrConfig)
    cfg["defense.method"] = "none"
    assert build_defense_config(cfg) is None
    cfg["defense.method"] = "wavelets"
    with pytest.raises(ConfigError):
        build_defense_config(cfg)
    cfg["defense.method"] = "mdda"
    cfg["defense.n_blocks"] = 0
    with pytest.raises(ConfigError):
        build_defense_config(cfg)


def test_defense_tv_knobs_flow_through():
    cfg = parse_config_text("""
defense.gamma = 20
defense.tv_penalty = 50
defense.tv_tol = 1e-4
defense.tv_max_outer_iters = 7
defense.tv_gauss_seidel_sweeps = 3
""")
    d = build_defense_config(cfg)
    assert d.tv.gamma == 20.0
    assert d.tv.penalty == 50.0
    assert d.tv.tol == 1e-4
    assert d.tv.max_outer_iters == 7
    assert d.tv.gauss_seidel_sweeps == 3
