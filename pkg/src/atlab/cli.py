"""Command-line entry point.

Subcommands:
    train       run the configured training loop; writes metrics.csv,
                summary.json, checkpoints, and a training figure
    eval        accuracy report for a checkpoint over the eval epsilons
    landscape   loss-surface probe around one test sample
    diversity   per-sample loss-std under attack/init combinations
    dmin-bench  space-filling benchmark of the stratified initializer

Every artifact embeds the config hash.  Exit codes: 0 success, 1 config
error, 2 runtime error.  The output directory comes from the config and
can be overridden by --output-dir or the ATLAB_OUTPUT_DIR env var.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .attacks import AttackKind, AttackSpec
from .config import (
    ConfigError,
    RunConfig,
    config_hash,
    parse_config_dict,
    parse_run_config,
    serialize_run_config,
)
from .data import emit_metrics, subsample
from .metrics import (
    accuracy_adversarial,
    accuracy_clean,
    loss_landscape_grid,
    loss_std_diversity,
)
from .models import load_model, save_model
from .noise import NoiseKind, min_pairwise_distance, tlhs_design, uniform_noise
from .seeding import derive_seed
from .trainer import train_run
from . import figures

__all__ = ["main"]

DEFAULT_EPSILON = 8.0 / 255.0


def _out_dir(config: RunConfig, args) -> Path:
    path = args.output_dir or os.environ.get("ATLAB_OUTPUT_DIR") or config.output_dir
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("missing --config")
    return parse_run_config(args.config)


def _load_checkpoint(args):
    if not args.checkpoint:
        raise ConfigError("missing --checkpoint")
    if not Path(args.checkpoint).exists():
        raise ConfigError(f"checkpoint not found: {args.checkpoint}")
    model, _ = load_model(args.checkpoint)
    return model


def cmd_train(args) -> int:
    config = _load_config(args)
    out = _out_dir(config, args)
    chash = config_hash(config)
    train_set, test_set = config.build_datasets()
    result = train_run(config.train_config(), train_set, test_set, config_hash=chash)

    emit_metrics(result.records, out / "metrics.csv", "csv")
    save_model(result.model, out / "checkpoint_best.bin", chash)
    save_model(result.final_model, out / "checkpoint_final.bin", chash)
    summary = {
        "config": config.to_dict(),
        "config_hash": chash,
        "best_epoch": result.best_epoch,
        "best_clean_acc": result.best_clean_acc,
        "best_adv_acc": result.best_adv_acc,
        "catastrophic_overfitting": result.co_flagged,
        "co_epoch": result.co_epoch,
        "total_steps": result.total_steps,
        "skipped_steps": result.skipped_steps,
        "epoch_skips": result.epoch_skips,
        "epoch_steps": result.epoch_steps,
        "mean_step_ms": result.mean_step_ms,
    }
    with open(out / "summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")
    with open(out / "config.json", "w", encoding="utf-8") as f:
        f.write(serialize_run_config(config))
    if not args.no_plot:
        figures.training_figure(result.records, out / "training.png")
    print(f"best epoch {result.best_epoch}: clean {result.best_clean_acc:.4f}, "
          f"adversarial {result.best_adv_acc:.4f} -> {out}")
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args)
    out = _out_dir(config, args)
    chash = config_hash(config)
    model = _load_checkpoint(args)
    _, test_set = config.build_datasets()
    eval_ds = subsample(test_set, config.eval.subsample, derive_seed(config.seed, "evalset"))
    rows = []
    clean = accuracy_clean(model, eval_ds)
    for i, eps in enumerate(config.eval.epsilons):
        adv = accuracy_adversarial(model, eval_ds, eps, steps=config.eval.steps,
                                   seed=derive_seed(config.seed, "evalatk", i))
        rows.append({
            "config_hash": chash, "epsilon": eps, "steps": config.eval.steps,
            "clean_acc": clean, "adv_acc": adv,
        })
    emit_metrics(rows, out / "eval.csv", "csv")
    if not args.no_plot:
        figures.eval_figure(rows, out / "eval.png")
    for r in rows:
        print(f"epsilon {r['epsilon']:.6g}: clean {r['clean_acc']:.4f}, "
              f"adversarial {r['adv_acc']:.4f}")
    return 0


def cmd_landscape(args) -> int:
    config = _load_config(args)
    out = _out_dir(config, args)
    chash = config_hash(config)
    model = _load_checkpoint(args)
    _, test_set = config.build_datasets()
    if not 0 <= args.index < len(test_set):
        raise ConfigError(f"--index {args.index} outside the test set (size {len(test_set)})")
    x = test_set.features[args.index]
    y = int(test_set.labels[args.index])
    grid = loss_landscape_grid(model, x, y, half_width=args.half_width,
                               resolution=args.resolution, seed=config.seed)
    rows = []
    for a, t1 in enumerate(grid.ts):
        for b, t2 in enumerate(grid.ts):
            rows.append({"config_hash": chash, "t1": float(t1), "t2": float(t2),
                         "loss": float(grid.losses[a, b])})
    emit_metrics(rows, out / "landscape.csv", "csv")
    if not args.no_plot:
        figures.landscape_figure(grid.ts, grid.losses, grid.std, out / "landscape.png")
    note = " (zero-gradient probe point)" if grid.degenerate else ""
    print(f"landscape over sample {args.index}: loss std {grid.std:.6g}{note}")
    return 0


def cmd_diversity(args) -> int:
    config = _load_config(args)
    out = _out_dir(config, args)
    chash = config_hash(config)
    model = _load_checkpoint(args)
    _, test_set = config.build_datasets()
    eval_ds = subsample(test_set, config.eval.subsample, derive_seed(config.seed, "evalset"))
    eps = config.attack.epsilon
    combos = [
        ("nfgsm", AttackSpec(AttackKind.NFGSM, eps, k=config.attack.k)),
        ("pgd", AttackSpec(AttackKind.PGD, eps, steps=config.attack.steps)),
    ]
    rows = []
    for name, spec in combos:
        for init in (NoiseKind.UNIFORM, NoiseKind.TLHS):
            val = loss_std_diversity(model, eval_ds, spec, init, reps=args.reps,
                                     seed=config.seed)
            rows.append({"config_hash": chash, "attack": name, "init": init.value,
                         "mean_std": val})
    emit_metrics(rows, out / "diversity.csv", "csv")
    if not args.no_plot:
        figures.diversity_figure(rows, out / "diversity.png")
    for r in rows:
        print(f"{r['attack']:>6} + {r['init']:<11} mean per-sample loss std {r['mean_std']:.6g}")
    return 0


def cmd_dmin_bench(args) -> int:
    if args.config is not None:
        config = parse_run_config(args.config)
    else:
        config = parse_config_dict({
            "dataset": {"kind": "blobs"},
            "attack": {"epsilon": DEFAULT_EPSILON},
        })
    out = _out_dir(config, args)
    chash = config_hash(config)
    epsilons = args.epsilon or [DEFAULT_EPSILON]
    rows = []
    for eps in epsilons:
        for seed in range(args.seeds):
            tl = tlhs_design(args.m, args.d, eps, seed)
            un = uniform_noise(args.m, args.d, eps, seed)
            rows.append({"config_hash": chash, "method": "tlhs", "epsilon": eps,
                         "seed": seed, "d_min": min_pairwise_distance(tl)})
            rows.append({"config_hash": chash, "method": "uniform", "epsilon": eps,
                         "seed": seed, "d_min": min_pairwise_distance(un)})
    emit_metrics(rows, out / "dmin.csv", "csv")
    if not args.no_plot:
        figures.dmin_figure(rows, out / "dmin.png")
    for eps in epsilons:
        for method in ("tlhs", "uniform"):
            vals = [r["d_min"] for r in rows if r["method"] == method and r["epsilon"] == eps]
            print(f"epsilon {eps:.6g} {method:>8}: mean d_min {np.mean(vals):.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atlab",
                                     description="desk-scale adversarial training laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("-c", "--config", default=None,
                       help="path to the JSON run config")
        p.add_argument("-o", "--output-dir", default=None,
                       help="override the config output directory")
        p.add_argument("--no-plot", action="store_true",
                       help="skip figure rendering next to the CSV output")

    p = sub.add_parser("train", help="train under the configured pipeline")
    common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="accuracy report for a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=False, help="model checkpoint to evaluate")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("landscape", help="loss surface probe around one sample")
    common(p)
    p.add_argument("--checkpoint", required=False)
    p.add_argument("--index", type=int, default=0, help="test-sample index to probe")
    p.add_argument("--half-width", type=float, default=0.1)
    p.add_argument("--resolution", type=int, default=21)
    p.set_defaults(fn=cmd_landscape)

    p = sub.add_parser("diversity", help="loss-std diversity of attack initializations")
    common(p)
    p.add_argument("--checkpoint", required=False)
    p.add_argument("--reps", type=int, default=4)
    p.set_defaults(fn=cmd_diversity)

    p = sub.add_parser("dmin-bench", help="space-filling benchmark of initializers")
    common(p)
    p.add_argument("--m", type=int, default=3, help="points per design")
    p.add_argument("--d", type=int, default=3072, help="design dimension")
    p.add_argument("--seeds", type=int, default=1000, help="number of random seeds")
    p.add_argument("--epsilon", type=float, action="append", default=None,
                   help="design radius; repeat for a sweep")
    p.set_defaults(fn=cmd_dmin_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
