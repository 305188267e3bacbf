#! /usr/bin/env python3
# vim:fenc=utf-8
#
# Copyright © 2025 Karol Będkowski <Karol Będkowski@kkomp>
#
# Distributed under terms of the GPLv3 license.

""" """

import argparse
import json
import logging
import sys
import typing as ty
from pathlib import Path

from . import (
    ablation,
    ckpt_io,
    config,
    consts,
    costs,
    data_synth,
    evaluate,
    heatmaps,
    numerics,
    reports,
    train,
)
from .model import OmniClip

_LOG = logging.getLogger()

DEFAULT_OUT: ty.Final = Path("out")


def _load_config(args: argparse.Namespace) -> config.RunConfig:
    cfg = config.load(args.config) if args.config else config.RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)

    return cfg


def _out_dir(args: argparse.Namespace) -> Path:
    out: Path = args.out or DEFAULT_OUT
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(
    args: argparse.Namespace, cfg: config.RunConfig
) -> data_synth.DatasetManifest:
    if getattr(args, "manifest", None):
        return data_synth.load_manifest(args.manifest)

    return data_synth.dataset_from_config(cfg)


def _restore(args: argparse.Namespace) -> OmniClip:
    ckpt = ckpt_io.load_checkpoint(args.checkpoint)
    return ckpt_io.restore_model(
        ckpt, allow_reinit_frozen=args.allow_reinit_frozen
    )


def main_dataset(args: argparse.Namespace) -> None:
    """cmd: dataset
    args: [--held-out <class> ...]
    """
    cfg = _load_config(args)
    if args.held_out:
        cfg = config.RunConfig(
            model=cfg.model,
            train=cfg.train,
            data=cfg.data.replace(held_out=args.held_out),
        )

    manifest = data_synth.dataset_from_config(cfg)
    file = _out_dir(args) / "manifest.json"
    data_synth.save_manifest(file, manifest)
    print(f"Saved {file}")


def main_train(args: argparse.Namespace) -> None:
    """cmd: train
    args: [--manifest <file>] [--resume <checkpoint>]
    """
    cfg = _load_config(args)
    manifest = _manifest(args, cfg)
    out = _out_dir(args)

    resume = None
    if args.resume:
        resume = ckpt_io.load_checkpoint(args.resume)
        model = ckpt_io.restore_model(
            resume, allow_reinit_frozen=args.allow_reinit_frozen
        )
    else:
        model = OmniClip(cfg.model)

    result = train.train(
        model,
        manifest,
        cfg.train,
        resume=resume,
        metrics_path=out / "metrics.jsonl",
        workers=args.workers,
    )
    file = out / "checkpoint.omni"
    ckpt_io.save_checkpoint(file, result.checkpoint)
    print(f"Saved {file}")


def main_eval(args: argparse.Namespace) -> None:
    """cmd: eval
    args: <checkpoint> [--manifest <file>] [--protocol <protocol>]
    """
    cfg = _load_config(args)
    manifest = _manifest(args, cfg)
    model = _restore(args)
    protocol = evaluate.parse_protocol(args.protocol)
    out = _out_dir(args)

    if isinstance(protocol, evaluate.ZeroShot) and args.splits > 1:
        report = evaluate.zero_shot_report(
            model,
            manifest,
            protocol.held_out,
            splits=args.splits,
            seed=cfg.train.seed,
        )
        for line in reports.generate_zero_shot(report):
            print(line)

        doc = {"top1": report.top1, "mean": report.mean, "std": report.std}
    else:
        metrics = evaluate.evaluate(model, manifest, protocol, args.workers)
        for line in reports.generate_metrics(metrics):
            print(line)

        doc = metrics.to_dict()

    with (out / "eval.json").open("w", encoding="utf-8") as fout:
        json.dump(doc, fout, indent=2, sort_keys=True)


def main_ablate(args: argparse.Namespace) -> None:
    """cmd: ablate
    args: <suite> [--task <label map>]
    """
    cfg = _load_config(args)
    table = ablation.run_ablation(
        args.suite, cfg, task=args.task, workers=args.workers
    )
    file = _out_dir(args) / f"ablation_{args.suite}.csv"
    ablation.write_csv(file, table)
    for line in reports.generate_ablation(table):
        print(line)

    print(f"Saved {file}")


def main_cost(args: argparse.Namespace) -> None:
    """cmd: cost
    args: [--vit-b16] [--json]
    """
    cfg = _load_config(args)
    model_cfg = (
        config.ModelConfig.vit_b16(seed=cfg.model.seed)
        if args.vit_b16
        else cfg.model
    )
    report = costs.cost_report(model_cfg)
    if args.json:
        print(json.dumps(report.to_dict(), sort_keys=True))
    else:
        for line in reports.generate_cost_table(report):
            print(line)

    if args.out:
        file = _out_dir(args) / "cost.json"
        with file.open("w", encoding="utf-8") as fout:
            json.dump(report.to_dict(), fout, indent=2, sort_keys=True)


def main_heatmap(args: argparse.Namespace) -> None:
    """cmd: heatmap
    args: <checkpoint> [--items <idx> ...] [--layer <n>] [--baseline]
    """
    cfg = _load_config(args)
    manifest = _manifest(args, cfg)
    model = _restore(args)
    files = heatmaps.export_heatmaps(
        model,
        manifest,
        args.items,
        args.layer,
        _out_dir(args),
        baseline=args.baseline,
    )
    print(f"Saved {len(files)} files")


def _add_common(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--config", type=Path, help="JSON config file")
    cmd.add_argument("--seed", type=int, help="override every seed")
    cmd.add_argument("--out", type=Path, help="output directory")
    cmd.add_argument(
        "--workers", type=int, default=None, help="worker threads"
    )


def _add_checkpoint(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("checkpoint", type=Path, help="Checkpoint file")
    cmd.add_argument(
        "--allow-reinit-frozen",
        action="store_true",
        help="fill missing frozen tensors from the seeded init",
    )


def _parse_args(argv: ty.Sequence[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser()
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        help="increase log level",
        default=0,
    )

    cmds = parser.add_subparsers(required=True)

    cmd = cmds.add_parser("dataset", help="Generate dataset manifest")
    _add_common(cmd)
    cmd.add_argument(
        "--held-out", nargs="*", default=[], help="zero-shot held-out classes"
    )
    cmd.set_defaults(func=main_dataset)

    cmd = cmds.add_parser("train", help="Train model")
    _add_common(cmd)
    cmd.add_argument("--manifest", type=Path, help="Dataset manifest")
    cmd.add_argument("--resume", type=Path, help="Checkpoint to continue")
    cmd.add_argument(
        "--allow-reinit-frozen",
        action="store_true",
        help="fill missing frozen tensors from the seeded init",
    )
    cmd.set_defaults(func=main_train)

    cmd = cmds.add_parser("eval", help="Evaluate checkpoint")
    _add_common(cmd)
    _add_checkpoint(cmd)
    cmd.add_argument("--manifest", type=Path, help="Dataset manifest")
    cmd.add_argument(
        "--protocol",
        default="supervised",
        help="supervised, few_shot:K or zero_shot:<class>[,<class>]",
    )
    cmd.add_argument(
        "--splits", type=int, default=1, help="zero-shot test splits"
    )
    cmd.set_defaults(func=main_eval)

    cmd = cmds.add_parser("ablate", help="Run ablation suite")
    _add_common(cmd)
    cmd.add_argument("suite", choices=consts.ABLATION_SUITES)
    cmd.add_argument("--task", choices=consts.LABEL_MAPS, help="label map")
    cmd.set_defaults(func=main_ablate)

    cmd = cmds.add_parser("cost", help="Print FLOPs and parameter counts")
    _add_common(cmd)
    cmd.add_argument(
        "--vit-b16", action="store_true", help="ViT-B/16 shape"
    )
    cmd.add_argument("--json", action="store_true", help="JSON output")
    cmd.set_defaults(func=main_cost)

    cmd = cmds.add_parser("heatmap", help="Export attention heatmaps")
    _add_common(cmd)
    _add_checkpoint(cmd)
    cmd.add_argument("--manifest", type=Path, help="Dataset manifest")
    cmd.add_argument("--items", type=int, nargs="+", default=[0])
    cmd.add_argument("--layer", type=int, default=-1)
    cmd.add_argument(
        "--baseline",
        action="store_true",
        help="also export maps of the frozen image pipeline",
    )
    cmd.set_defaults(func=main_heatmap)

    return parser.parse_args(argv)


def error_line(err: BaseException) -> str:
    return json.dumps({"error": type(err).__name__, "message": str(err)})


def main(argv: ty.Sequence[str] | None = None) -> None:
    logging.basicConfig()

    args = _parse_args(argv)

    match args.verbose:
        case 0:
            logging.getLogger().setLevel(logging.WARNING)
        case 1:
            logging.getLogger().setLevel(logging.INFO)
        case _:
            logging.getLogger().setLevel(logging.DEBUG)
            numerics.enable_debug()

    try:
        args.func(args)
    except Exception as err:  # noqa: BLE001
        _LOG.debug("command failed", exc_info=True)
        print(error_line(err), file=sys.stderr)
        sys.exit(1)
