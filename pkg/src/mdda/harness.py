"""Evaluation harness: attack -> defend -> classify loops with exact counts.

Reports are built from confusion matrices, so every accuracy is exactly
recomputable from the stored counts. Canonical JSON/CSV output contains no
timing and is byte-identical across runs with the same seeds; wall-clock
numbers go to a separate timing document.

Seeding: the attack stream for image ``i`` is
``RngState(attack.seed).child("attack").child(i)``, and purification draws
its noise from the defense config's own seed, so per-image work is
order-independent and a worker pool cannot change any result.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import time
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .attacks import AttackConfig, attack_image
from .baselines import BdrConfig, bit_depth_reduce
from .image import DimensionMismatchError
from .model import ClassifierModel, predict, predict_batch
from .pipeline import MddaConfig, purify
from .rng import RngState

SCHEMA_VERSION = 1

# report conditions, in-order: raw, attack only, defense only, both
CONDITIONS = ("clean", "attacked", "defended_clean", "defended_attacked")

DefenseConfig = Union[MddaConfig, BdrConfig]


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K integer counts; rows are true classes, columns predictions."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        counts = np.asarray(self.counts)
        k = len(self.class_names)
        if counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}, got {counts.shape}")
        if not np.issubdtype(counts.dtype, np.integer) or (counts < 0).any():
            raise ValueError("counts must be non-negative integers")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @classmethod
    def from_predictions(cls, true_labels, predicted, class_names) -> "ConfusionMatrix":
        k = len(class_names)
        counts = np.zeros((k, k), dtype=np.int64)
        for t, p in zip(np.asarray(true_labels), np.asarray(predicted)):
            counts[int(t), int(p)] += 1
        return cls(counts=counts, class_names=tuple(class_names))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        if self.total == 0:
            raise ValueError("empty confusion matrix has no accuracy")
        return float(np.trace(self.counts)) / self.total

    def to_csv(self) -> str:
        lines = ["true\\predicted," + ",".join(self.class_names)]
        for name, row in zip(self.class_names, self.counts):
            lines.append(name + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    def to_ascii(self) -> str:
        width = max(max(len(n) for n in self.class_names), len(str(self.counts.max())), 5)
        header = " " * (width + 2) + " ".join(f"{n:>{width}}" for n in self.class_names)
        lines = [header]
        for name, row in zip(self.class_names, self.counts):
            cells = " ".join(f"{int(v):>{width}}" for v in row)
            lines.append(f"{name:>{width}} |" + " " + cells)
        return "\n".join(lines)


def apply_defense(img, defense: DefenseConfig) -> np.ndarray:
    """Run one image through the configured preprocessing defense."""
    if isinstance(defense, MddaConfig):
        return purify(img, defense)
    if isinstance(defense, BdrConfig):
        return bit_depth_reduce(img, defense.bits)
    raise TypeError(f"unknown defense config type: {type(defense).__name__}")


def model_digest(model: ClassifierModel) -> str:
    """Stable short id for a set of weights."""
    h = hashlib.sha256()
    h.update(repr((model.input_dims, model.n_classes, model.hidden_sizes)).encode())
    for w, b in zip(model.weights, model.biases):
        h.update(w.tobytes())
        h.update(b.tobytes())
    return h.hexdigest()[:16]


def attack_descriptor(cfg: Optional[AttackConfig]) -> Optional[dict]:
    if cfg is None:
        return None
    return {
        "method": cfg.method,
        "epsilon": cfg.epsilon,
        "steps": cfg.steps,
        "step_size": cfg.step_size,
        "cw_lambda": cfg.cw_lambda,
        "cw_lr": cfg.cw_lr,
        "cw_margin": cfg.cw_margin,
        "seed": cfg.seed,
    }


def defense_descriptor(cfg: Optional[DefenseConfig]) -> Optional[dict]:
    if cfg is None:
        return None
    if isinstance(cfg, BdrConfig):
        return {"method": "bdr", "bits": cfg.bits}
    if isinstance(cfg, MddaConfig):
        return {
            "method": "mdda",
            "sigma2": cfg.noise.sigma2,
            "n_blocks": cfg.n_blocks,
            "gamma": cfg.tv.gamma,
            "tv_penalty": cfg.tv.penalty,
            "tv_tol": cfg.tv.tol,
            "tv_max_outer_iters": cfg.tv.max_outer_iters,
            "tv_gauss_seidel_sweeps": cfg.tv.gauss_seidel_sweeps,
            "scales": [str(s) for s in cfg.scales],
            "seed": cfg.seed,
        }
    raise TypeError(f"unknown defense config type: {type(cfg).__name__}")


@dataclass(frozen=True)
class EvalReport:
    """Accuracies under each condition, all derived from stored counts."""

    dataset_split: str
    n_images: int
    model_id: str
    attack: Optional[AttackConfig]
    defense: Optional[DefenseConfig]
    matrices: dict  # condition name -> ConfusionMatrix
    seconds_per_image: dict  # condition name -> float; not in canonical output
    config_hash: str

    def accuracy(self, condition: str) -> float:
        if condition not in self.matrices:
            raise KeyError(f"report has no condition {condition!r}")
        return self.matrices[condition].accuracy

    @property
    def accuracies(self) -> dict:
        return {c: self.matrices[c].accuracy for c in CONDITIONS if c in self.matrices}

    def _condition_block(self) -> dict:
        return {
            "dataset_split": self.dataset_split,
            "n_images": self.n_images,
            "model_id": self.model_id,
            "attack": attack_descriptor(self.attack),
            "defense": defense_descriptor(self.defense),
        }

    def to_json(self) -> str:
        """Canonical report: sorted keys, no timing, trailing newline."""
        doc = {
            "schema_version": SCHEMA_VERSION,
            "condition": self._condition_block(),
            "config_hash": self.config_hash,
            "accuracies": self.accuracies,
            "confusion_matrices": {
                name: {
                    "class_names": list(m.class_names),
                    "counts": m.counts.tolist(),
                }
                for name, m in self.matrices.items()
            },
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def timing_json(self) -> str:
        """Wall-clock seconds per image; separate so reports stay canonical."""
        return json.dumps({"seconds_per_image": self.seconds_per_image},
                          sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        """Flat accuracy table, one row per measured condition."""
        lines = ["condition,n_images,correct,accuracy"]
        for name in CONDITIONS:
            if name in self.matrices:
                m = self.matrices[name]
                correct = int(np.trace(m.counts))
                lines.append(f"{name},{m.total},{correct},{m.accuracy!r}")
        return "\n".join(lines) + "\n"


def _config_hash(block: dict) -> str:
    return hashlib.sha256(
        json.dumps(block, sort_keys=True).encode()
    ).hexdigest()[:16]


# ---------------------------------------------------------------------------
# per-image work, parallelizable across a fork pool
# ---------------------------------------------------------------------------

_WORK_STATE = None  # (model, images, labels, attack, defense) in workers


def _attack_rng(attack: AttackConfig, index: int) -> RngState:
    return RngState(attack.seed).child("attack").child(index)


def _image_job(i: int):
    model, images, labels, attack, defense = _WORK_STATE
    img, label = images[i], int(labels[i])
    pred_att = pred_dc = pred_da = -1
    t_att = t_dc = t_da = 0.0
    adv = None
    if attack is not None:
        t0 = time.perf_counter()
        adv = attack_image(model, img, label, attack, _attack_rng(attack, i))
        t_att = time.perf_counter() - t0
        pred_att = predict(model, adv)
    if defense is not None:
        t0 = time.perf_counter()
        pred_dc = predict(model, apply_defense(img, defense))
        t_dc = time.perf_counter() - t0
        if adv is not None:
            t0 = time.perf_counter()
            pred_da = predict(model, apply_defense(adv, defense))
            t_da = time.perf_counter() - t0
    return i, pred_att, pred_dc, pred_da, t_att, t_dc, t_da


def _run_image_jobs(state, n: int, jobs: int):
    global _WORK_STATE
    _WORK_STATE = state
    try:
        if jobs <= 1:
            return [_image_job(i) for i in range(n)]
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=jobs) as pool:
            return pool.map(_image_job, range(n), chunksize=max(1, n // (4 * jobs)))
    finally:
        _WORK_STATE = None


def evaluate(model, dataset, attack: Optional[AttackConfig] = None,
             defense: Optional[DefenseConfig] = None, n_images: Optional[int] = None,
             jobs: int = 1) -> EvalReport:
    """Measure the model under every condition the inputs define.

    Always measures clean accuracy; an attack config adds the attacked
    condition, a defense config adds defended-clean (the defense cannot
    know ahead of time whether its input is adversarial, so it is always
    measured on clean images too), and both together add defended-attacked.
    """
    n = len(dataset) if n_images is None else int(n_images)
    if not 1 <= n <= len(dataset):
        raise ValueError(f"n_images must be in [1, {len(dataset)}], got {n}")
    images, labels = dataset.images[:n], dataset.labels[:n]
    if images.shape[1:] != model.input_dims:
        raise DimensionMismatchError(
            f"dataset images {images.shape[1:]} do not match model {model.input_dims}"
        )

    t0 = time.perf_counter()
    clean_preds = predict_batch(model, images)
    timing = {"clean": (time.perf_counter() - t0) / n}
    preds = {"clean": clean_preds}

    if attack is not None or defense is not None:
        results = _run_image_jobs((model, images, labels, attack, defense), n, jobs)
        results.sort(key=lambda r: r[0])
        if attack is not None:
            preds["attacked"] = np.array([r[1] for r in results])
            timing["attacked"] = sum(r[4] for r in results) / n
        if defense is not None:
            preds["defended_clean"] = np.array([r[2] for r in results])
            timing["defended_clean"] = sum(r[5] for r in results) / n
            if attack is not None:
                preds["defended_attacked"] = np.array([r[3] for r in results])
                timing["defended_attacked"] = sum(r[6] for r in results) / n

    matrices = {
        name: ConfusionMatrix.from_predictions(labels, p, dataset.class_names)
        for name, p in preds.items()
    }
    report = EvalReport(
        dataset_split=dataset.split,
        n_images=n,
        model_id=model_digest(model),
        attack=attack,
        defense=defense,
        matrices=matrices,
        seconds_per_image=timing,
        config_hash="",
    )
    object.__setattr__(report, "config_hash", _config_hash(report._condition_block()))
    return report


def mean_accuracy(accuracies: Sequence[float]) -> float:
    """Arithmetic mean over a row of per-condition accuracies.

    The clean column counts like any attack column, which is the convention
    that reproduces the reference row mean (82.0, 0.99, 0, 0, 0, 0.04, 0)
    -> 11.86.
    """
    values = [float(v) for v in accuracies]
    if not values:
        raise ValueError("mean_accuracy needs at least one accuracy")
    return sum(values) / len(values)


# ---------------------------------------------------------------------------
# parameter-sensitivity sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    """One (noise variance, block count) grid point of a sweep."""

    sigma2: float
    n_blocks: int
    gamma: float
    clean_accuracy: float
    attacked_accuracy: Optional[float]
    defended_clean_accuracy: float
    defended_attacked_accuracy: Optional[float]


def sensitivity_sweep(model, dataset, sigma2_grid: Sequence[float],
                      n_blocks_grid: Sequence[int], attack: Optional[AttackConfig] = None,
                      defense_seed: int = 1, n_images: Optional[int] = None,
                      jobs: int = 1, progress=None) -> list:
    """Evaluate the defense over a (sigma2 x n_blocks) grid.

    Adversarial examples do not depend on the defense, so they are computed
    once and reused for every grid point. ``progress`` is an optional
    callable fed one line per completed grid point.
    """
    sigma2_grid = [float(s) for s in sigma2_grid]
    n_blocks_grid = [int(b) for b in n_blocks_grid]
    if not sigma2_grid or not n_blocks_grid:
        raise ValueError("sweep grids must be non-empty")
    if min(sigma2_grid) < 0:
        raise ValueError(f"sigma2 grid must be >= 0, got {min(sigma2_grid)}")
    if min(n_blocks_grid) < 1:
        raise ValueError(f"n_blocks grid must be >= 1, got {min(n_blocks_grid)}")

    n = len(dataset) if n_images is None else int(n_images)
    if not 1 <= n <= len(dataset):
        raise ValueError(f"n_images must be in [1, {len(dataset)}], got {n}")
    images, labels = dataset.images[:n], dataset.labels[:n]

    clean_acc = float(np.mean(predict_batch(model, images) == labels))
    attacked_acc = None
    advs = None
    if attack is not None:
        advs = _compute_advs(model, images, labels, attack, jobs)
        attacked_acc = float(np.mean(predict_batch(model, advs) == labels))

    rows = []
    for s2 in sigma2_grid:
        for nb in n_blocks_grid:
            cfg = MddaConfig.create(sigma2=s2, n_blocks=nb, seed=defense_seed)
            dc_preds = _defended_predictions(model, images, cfg, jobs)
            dc = float(np.mean(dc_preds == labels))
            da = None
            if advs is not None:
                da_preds = _defended_predictions(model, advs, cfg, jobs)
                da = float(np.mean(da_preds == labels))
            rows.append(SweepRow(
                sigma2=s2, n_blocks=nb, gamma=cfg.tv.gamma,
                clean_accuracy=clean_acc, attacked_accuracy=attacked_acc,
                defended_clean_accuracy=dc, defended_attacked_accuracy=da,
            ))
            if progress is not None:
                progress(f"sigma2={s2:g} n_blocks={nb} defended_clean={dc:.4f}"
                         + (f" defended_attacked={da:.4f}" if da is not None else ""))
    return rows


_ADV_STATE = None


def _adv_job(i: int):
    model, images, labels, attack = _ADV_STATE
    return i, attack_image(model, images[i], int(labels[i]), attack, _attack_rng(attack, i))


def _compute_advs(model, images, labels, attack, jobs):
    global _ADV_STATE
    _ADV_STATE = (model, images, labels, attack)
    try:
        if jobs <= 1:
            results = [_adv_job(i) for i in range(len(images))]
        else:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(processes=jobs) as pool:
                results = pool.map(_adv_job, range(len(images)))
    finally:
        _ADV_STATE = None
    results.sort(key=lambda r: r[0])
    return np.stack([r[1] for r in results])


_DEFEND_STATE = None


def _defend_job(i: int):
    model, images, defense = _DEFEND_STATE
    return i, predict(model, apply_defense(images[i], defense))


def _defended_predictions(model, images, defense, jobs):
    global _DEFEND_STATE
    _DEFEND_STATE = (model, images, defense)
    try:
        if jobs <= 1:
            return np.array([_defend_job(i)[1] for i in range(len(images))])
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=jobs) as pool:
            results = pool.map(_defend_job, range(len(images)),
                               chunksize=max(1, len(images) // (4 * jobs)))
    finally:
        _DEFEND_STATE = None
    results.sort(key=lambda r: r[0])
    return np.array([r[1] for r in results])


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    """Flat CSV of a sensitivity sweep, one grid point per row."""
    header = ("sigma2,n_blocks,gamma,clean_accuracy,attacked_accuracy,"
              "defended_clean_accuracy,defended_attacked_accuracy")
    lines = [header]
    for r in rows:
        att = "" if r.attacked_accuracy is None else repr(r.attacked_accuracy)
        datt = "" if r.defended_attacked_accuracy is None else repr(r.defended_attacked_accuracy)
        lines.append(f"{r.sigma2!r},{r.n_blocks},{r.gamma!r},{r.clean_accuracy!r},"
                     f"{att},{r.defended_clean_accuracy!r},{datt}")
    return "\n".join(lines) + "\n"
