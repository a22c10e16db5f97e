"""Command-line interface: data generation, training, attacks, evaluation.

Every subcommand is driven by the same flat key=value configuration
(defaults, then ``--config FILE``, then repeated ``--set key=value``, then
``--seed`` which re-pins every component seed). Exit codes: 0 success,
1 usage/config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import (
    ConfigError,
    apply_master_seed,
    apply_overrides,
    build_attack_config,
    build_defense_config,
    build_train_config,
    default_config,
    load_config,
)
from .data import LabeledDataset, generate_dataset, load_dataset, save_dataset
from .harness import (
    CONDITIONS,
    apply_defense,
    evaluate,
    mean_accuracy,
    sensitivity_sweep,
    sweep_csv,
)
from .image import load_image, save_image
from .model import accuracy, load_model, save_model, train


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(parser: _Parser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed pinning data/model/attack/defense streams")
    parser.add_argument("--config", type=Path, default=None,
                        help="key=value config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes for per-image work")


def build_parser() -> _Parser:
    parser = _Parser(prog="mdda", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data",
                       help="generate the synthetic blob dataset")
    p.add_argument("--out", type=Path, required=True, help="output dataset directory")
    _add_common(p)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train-toy",
                       help="train the toy victim classifier")
    p.add_argument("--data", type=Path, required=True, help="training split directory")
    p.add_argument("--out", type=Path, required=True, help="output model file")
    _add_common(p)
    p.set_defaults(func=_cmd_train_toy)

    p = sub.add_parser("attack",
                       help="write adversarial copies of a dataset split")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="split directory to attack")
    p.add_argument("--out", type=Path, required=True, help="output dataset directory")
    _add_common(p)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("defend",
                       help="run the configured defense over a dataset split")
    p.add_argument("--data", type=Path, required=True, help="split directory to defend")
    p.add_argument("--out", type=Path, required=True, help="output dataset directory")
    _add_common(p)
    p.set_defaults(func=_cmd_defend)

    p = sub.add_parser("purify",
                       help="purify a single image file")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_purify)

    p = sub.add_parser("evaluate",
                       help="full attack/defend/classify evaluation with reports")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="split directory to evaluate")
    p.add_argument("--out", type=Path, required=True, help="report output directory")
    _add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep",
                       help="defense sensitivity sweep over (sigma2, n_blocks)")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="split directory to sweep on")
    p.add_argument("--out", type=Path, required=True, help="CSV output directory")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    return parser


def _resolve_config(args) -> dict:
    cfg = default_config()
    if args.config is not None:
        cfg = load_config(args.config)
    cfg = apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg = apply_master_seed(cfg, args.seed)
    return cfg


def _cmd_gen_data(args, cfg) -> int:
    train_ds, test_ds = generate_dataset(
        cfg["data.seed"], cfg["data.n_train"], cfg["data.n_test"])
    save_dataset(train_ds, args.out / "train")
    save_dataset(test_ds, args.out / "test")
    print(f"wrote {len(train_ds)} train / {len(test_ds)} test images to {args.out}")
    return 0


def _cmd_train_toy(args, cfg) -> int:
    dataset = load_dataset(args.data)
    model = train(dataset, build_train_config(cfg))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, args.out)
    print(f"trained on {len(dataset)} images; "
          f"train accuracy {accuracy(model, dataset):.4f}; saved to {args.out}")
    return 0


def _require_attack(cfg):
    attack = build_attack_config(cfg)
    if attack is None:
        raise ConfigError("this command needs attack.method != 'none'")
    return attack


def _require_defense(cfg):
    defense = build_defense_config(cfg)
    if defense is None:
        raise ConfigError("this command needs defense.method != 'none'")
    return defense


def _cmd_attack(args, cfg) -> int:
    import numpy as np

    from .attacks import attack_image
    from .harness import _attack_rng
    from .model import predict_batch

    model = load_model(args.model)
    dataset = load_dataset(args.data)
    attack = _require_attack(cfg)
    advs = np.stack([
        attack_image(model, dataset.images[i], int(dataset.labels[i]), attack,
                     _attack_rng(attack, i))
        for i in range(len(dataset))
    ])
    adv_ds = LabeledDataset(images=advs, labels=dataset.labels,
                            class_names=dataset.class_names,
                            split=f"{dataset.split}+{attack.method}")
    save_dataset(adv_ds, args.out)
    acc = float(np.mean(predict_batch(model, advs) == dataset.labels))
    print(f"{attack.method} at epsilon={attack.epsilon:.6g}: "
          f"attacked accuracy {acc:.4f}; wrote {len(adv_ds)} images to {args.out}")
    print("note: saved images are 8-bit quantized; evaluate measures in-memory")
    return 0


def _cmd_defend(args, cfg) -> int:
    import numpy as np

    dataset = load_dataset(args.data)
    defense = _require_defense(cfg)
    cleaned = np.stack([apply_defense(img, defense) for img in dataset.images])
    out_ds = LabeledDataset(images=cleaned, labels=dataset.labels,
                            class_names=dataset.class_names,
                            split=f"{dataset.split}+defended")
    save_dataset(out_ds, args.out)
    print(f"defended {len(out_ds)} images into {args.out}")
    return 0


def _cmd_purify(args, cfg) -> int:
    defense = _require_defense(cfg)
    img = load_image(args.input)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_image(apply_defense(img, defense), args.out)
    print(f"purified {args.input} -> {args.out}")
    return 0


def _cmd_evaluate(args, cfg) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.data)
    report = evaluate(
        model, dataset,
        attack=build_attack_config(cfg),
        defense=build_defense_config(cfg),
        n_images=cfg["eval.n_images"],
        jobs=args.jobs,
    )
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    (out / "timing.json").write_text(report.timing_json())
    for name, matrix in report.matrices.items():
        (out / f"confusion_{name}.csv").write_text(matrix.to_csv())
    for name in CONDITIONS:
        if name in report.matrices:
            print(f"{name:>18}: {report.accuracy(name):.4f}")
    print(f"{'mean':>18}: {mean_accuracy(list(report.accuracies.values())):.4f}")
    for name in CONDITIONS:
        if name in report.matrices:
            print(f"\nconfusion ({name}):")
            print(report.matrices[name].to_ascii())
    print(f"\nreports written to {out}")
    return 0


def _cmd_sweep(args, cfg) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.data)
    rows = sensitivity_sweep(
        model, dataset,
        sigma2_grid=cfg["sweep.sigma2"],
        n_blocks_grid=cfg["sweep.n_blocks"],
        attack=build_attack_config(cfg),
        defense_seed=cfg["defense.seed"],
        n_images=cfg["eval.n_images"],
        jobs=args.jobs,
        progress=print,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "sweep.csv").write_text(sweep_csv(rows))
    print(f"wrote {len(rows)} grid points to {args.out / 'sweep.csv'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _resolve_config(args)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures -> exit 2, message on stderr
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
