"""Command-line entry point.

Subcommands: ``generate-data``, ``train``, ``eval``, ``infer``, ``budget``,
``ablate``. Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors.
``SCANET_DETERMINISTIC=1`` forces single-threaded deterministic execution.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__
from .config import ModelConfig
from .losses import ms_ssim  # noqa: F401  (re-exported for scripts)
from .metrics import count_parameters, estimate_flops, evaluate_dirs, evaluate_pairs
from .models import PatchDiscriminator, SCANet, dehaze_image
from .synthdata import generate_dataset, load_dataset, read_image, write_image
from .trainer import (ABLATION_TABLE, TrainConfig, ablation_config, build_from_checkpoint,
                      load_checkpoint, train)


def _load_run_config(path: str | None) -> tuple[dict, dict]:
    if path is None:
        return {}, {}
    with open(path) as f:
        raw = json.load(f)
    unknown = set(raw) - {"model", "train"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)} (expected 'model'/'train')")
    return raw.get("model", {}), raw.get("train", {})


def _resolved_train_config(args) -> tuple[ModelConfig, TrainConfig]:
    """Defaults <- config file <- command-line flags (flags win)."""
    model_d, train_d = _load_run_config(getattr(args, "config", None))
    model_cfg = ModelConfig.from_dict(model_d)

    overrides = {
        "epochs": args.epochs, "max_steps": args.max_steps, "batch": args.batch,
        "lr": args.lr, "seed": args.seed, "patch": args.patch, "stride": args.stride,
        "sample_every": args.sample_every,
        "use_agn": args.agn, "use_sl1a": args.sl1a, "use_scl": args.scl,
        "use_perceptual": args.perceptual, "use_msssim": args.msssim,
        "use_adversarial": args.adversarial,
        "pretrained_features": args.pretrained_features,
    }
    train_d.update({k: v for k, v in overrides.items() if v is not None})
    return model_cfg, TrainConfig.from_dict(train_d)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config with 'model'/'train' sections")
    p.add_argument("--epochs", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--patch", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--sample-every", type=int)
    p.add_argument("--pretrained-features", action=argparse.BooleanOptionalAction, default=None)
    for flag in ("agn", "sl1a", "scl", "perceptual", "msssim", "adversarial"):
        p.add_argument(f"--{flag}", action=argparse.BooleanOptionalAction, default=None,
                       help=f"enable/disable the {flag} component")


def cmd_generate_data(args) -> int:
    manifest = generate_dataset(args.pairs, args.size, args.out, seed=args.seed,
                                smoothness=args.smoothness, t_min=args.t_min,
                                atmos=args.atmos)
    print(f"wrote {manifest['n_pairs']} pairs of size {manifest['size']} "
          f"(seed {manifest['seed']}) under {args.out}")
    return 0


def cmd_train(args) -> int:
    model_cfg, train_cfg = _resolved_train_config(args)
    result = train(model_cfg, train_cfg, args.data, args.run_dir)
    print(f"trained {result.steps} steps; checkpoint: {result.checkpoint_path}")
    print(f"metrics: {result.metrics_path}")
    return 0


def cmd_eval(args) -> int:
    result = evaluate_dirs(args.pred, args.gt)
    if args.out_csv:
        with open(args.out_csv, "w") as f:
            f.write("name,psnr,ssim\n")
            for name, p, s in result.per_image:
                f.write(f"{name},{p:.10g},{s:.10g}\n")
    if args.out_json:
        with open(args.out_json, "w") as f:
            json.dump({"psnr_mean": result.psnr_mean, "ssim_mean": result.ssim_mean,
                       "n_images": len(result.per_image)}, f, indent=2, sort_keys=True)
    for name, p, s in result.per_image:
        print(f"{name}: PSNR {p:.4f} dB, SSIM {s:.6f}")
    print(f"mean: PSNR {result.psnr_mean:.4f} dB, SSIM {result.ssim_mean:.6f}")
    return 0


def cmd_infer(args) -> int:
    payload = load_checkpoint(args.checkpoint)
    model, _ = build_from_checkpoint(payload)
    img = read_image(args.input)
    if img.ndim != 3:
        raise ValueError(f"{args.input!r} is not a color image")
    write_image(args.output, dehaze_image(model, img))
    print(f"wrote {args.output}")
    return 0


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"input size must look like 1200x1600, got {text!r}") from None
    if h <= 0 or w <= 0:
        raise ValueError(f"input size must be positive, got {text!r}")
    return h, w


def cmd_budget(args) -> int:
    model_d, _ = _load_run_config(args.config)
    model_cfg = ModelConfig.from_dict(model_d)
    size = _parse_size(args.input)
    budget = estimate_flops(SCANet(model_cfg), size)
    disc_params = count_parameters(PatchDiscriminator())
    print(f"input size: {size[0]}x{size[1]}")
    print(f"generator parameters: {budget.parameter_count:,} ({budget.parameter_count / 1e6:.2f}M)")
    print(f"generator MACs: {budget.macs:,} ({budget.macs / 1e9:.2f}G)")
    print(f"generator FLOPs (2x MACs): {budget.flops:,} ({budget.flops / 1e9:.2f}G)")
    print(f"discriminator parameters: {disc_params:,} ({disc_params / 1e6:.2f}M)")
    if budget.uncounted:
        print(f"uncounted layer types: {', '.join(budget.uncounted)}")
    return 0


def cmd_ablate(args) -> int:
    model_d, train_d = _load_run_config(args.config)
    model_cfg = ModelConfig.from_dict(model_d)
    overrides = {"epochs": args.epochs, "max_steps": args.max_steps, "seed": args.seed,
                 "patch": args.patch, "stride": args.stride, "sample_every": 0}
    train_d.update({k: v for k, v in overrides.items() if v is not None})
    base = TrainConfig.from_dict(train_d)

    os.makedirs(args.out, exist_ok=True)
    data = load_dataset(args.data)
    rows = []
    for number, label, _ in ABLATION_TABLE:
        cfg = ablation_config(base, number)
        run_dir = os.path.join(args.out, f"config{number}")
        result = train(model_cfg, cfg, args.data, run_dir)
        result.model.eval()
        scored = evaluate_pairs((name, dehaze_image(result.model, hazy), clear)
                                for name, clear, hazy in data)
        rows.append((number, label, cfg, scored.psnr_mean, scored.ssim_mean))
        print(f"({number}) {label}: PSNR {scored.psnr_mean:.4f} dB, SSIM {scored.ssim_mean:.6f}")

    _write_ablation_tables(args.out, rows)
    print(f"wrote {os.path.join(args.out, 'ablation.csv')} and ablation.md")
    return 0


def _write_ablation_tables(out_dir: str, rows) -> None:
    flags = ("use_sl1a", "use_scl", "use_perceptual", "use_msssim", "use_adversarial")
    headers = ("number", "configuration", "sl1", "sl1_a", "scl", "perceptual",
               "msssim", "adversarial", "psnr", "ssim")
    with open(os.path.join(out_dir, "ablation.csv"), "w") as f:
        f.write(",".join(headers) + "\n")
        for number, label, cfg, p, s in rows:
            marks = ["1"] + ["1" if getattr(cfg, k) else "" for k in flags[:1]] \
                + ["1" if getattr(cfg, k) else "" for k in flags[1:]]
            f.write(f"{number},{label}," + ",".join(marks) + f",{p:.10g},{s:.10g}\n")
    with open(os.path.join(out_dir, "ablation.md"), "w") as f:
        f.write("| # | Configuration | sl1 | sl1_a | SCL | perceptual | MS-SSIM | adversarial"
                " | PSNR | SSIM |\n")
        f.write("|---|---|---|---|---|---|---|---|---|---|\n")
        for number, label, cfg, p, s in rows:
            cells = ["x"] + ["x" if getattr(cfg, k) else "" for k in flags]
            f.write(f"| {number} | {label} | " + " | ".join(cells)
                    + f" | {p:.2f} | {s:.4f} |\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scanet",
                                     description="Non-homogeneous dehazing toolkit")
    parser.add_argument("--version", action="version", version=f"scanet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="write a synthetic paired dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, default=8)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--smoothness", type=float, default=1.0)
    p.add_argument("--t-min", type=float, default=0.3)
    p.add_argument("--atmos", type=float, default=0.9)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="train on a paired dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--run-dir", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="PSNR/SSIM between two image directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="dehaze one image with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("budget", help="parameter and operation counts")
    p.add_argument("--input", default="1200x1600", help="HxW input size")
    p.add_argument("--config", help="JSON run config (model section used)")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("ablate", help="train and score the ablation grid")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--patch", type=int)
    p.add_argument("--stride", type=int)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # runtime failures: message + exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
