"""Multiscale diffusive-denoising purification of adversarial examples.

A preprocessing defense (noise injection + total-variation denoising +
cross-scale aggregation over an image pyramid) packaged with a desk-scale
adversarial testbed: a synthetic dataset, a small differentiable victim
classifier, white-box gradient attacks, a bit-depth-reduction baseline,
and a deterministic evaluation harness.
"""

from .attacks import METHODS, AttackConfig, attack_image, cw_attack, fgsm, iterative_attack
from .baselines import BdrConfig, bit_depth_reduce
from .data import (
    CLASS_NAMES,
    IMAGE_SIZE,
    LabeledDataset,
    generate_dataset,
    generate_split,
    load_dataset,
    save_dataset,
)
from .diffusion import NoiseConfig, diffuse_step, sample_gaussian_field
from .harness import (
    ConfusionMatrix,
    EvalReport,
    SweepRow,
    apply_defense,
    evaluate,
    mean_accuracy,
    sensitivity_sweep,
    sweep_csv,
)
from .image import (
    as_image,
    inverse_resize,
    linf_distance,
    load_image,
    project,
    resize,
    save_image,
)
from .model import (
    ClassifierModel,
    TrainConfig,
    accuracy,
    forward,
    init_model,
    load_model,
    predict,
    predict_batch,
    save_model,
    train,
)
from .pipeline import DEFAULT_SCALES, MddaConfig, ScalePyramid, default_gamma, purify
from .rng import RngState
from .tv import TvConfig, denoise_split_bregman, rof_objective

__version__ = "0.1.0"

__all__ = [
    "METHODS",
    "AttackConfig",
    "attack_image",
    "cw_attack",
    "fgsm",
    "iterative_attack",
    "BdrConfig",
    "bit_depth_reduce",
    "CLASS_NAMES",
    "IMAGE_SIZE",
    "LabeledDataset",
    "generate_dataset",
    "generate_split",
    "load_dataset",
    "save_dataset",
    "NoiseConfig",
    "diffuse_step",
    "sample_gaussian_field",
    "ConfusionMatrix",
    "EvalReport",
    "SweepRow",
    "apply_defense",
    "evaluate",
    "mean_accuracy",
    "sensitivity_sweep",
    "sweep_csv",
    "as_image",
    "inverse_resize",
    "linf_distance",
    "load_image",
    "project",
    "resize",
    "save_image",
    "ClassifierModel",
    "TrainConfig",
    "accuracy",
    "forward",
    "init_model",
    "load_model",
    "predict",
    "predict_batch",
    "save_model",
    "train",
    "DEFAULT_SCALES",
    "MddaConfig",
    "ScalePyramid",
    "default_gamma",
    "purify",
    "RngState",
    "TvConfig",
    "denoise_split_bregman",
    "rof_objective",
    "__version__",
]
