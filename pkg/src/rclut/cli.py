"""Command-line front end: train, export, upscale, eval, rf, size, inspect.

Exit codes are a stable contract for CI: 0 success, 1 configuration
error, 2 data error, 3 artifact corruption.  Every subcommand prints its
resolved configuration before doing any work, and every run is
deterministic given the same flags and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .errors import ConfigError, CorruptPackError, DataError

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as config errors (exit 1)."""

    def error(self, message):
        raise ConfigError(message)


def _print_config(command: str, resolved: dict) -> None:
    print(f"[{command}] resolved config:")
    print(json.dumps(resolved, indent=2, sort_keys=True, default=str))


def _load_network_config(args):
    from .presets import preset
    from .refnet import NetworkConfig

    train_doc = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        net_doc = doc.get("network", doc)
        config = NetworkConfig.from_dict(net_doc)
        train_doc = doc.get("train", {})
    else:
        config = preset(getattr(args, "preset", None) or "rclut-default")
    return config, train_doc


def _train_config(args, train_doc, iterations_flag="iters"):
    from .trainer import TrainConfig

    tcfg = TrainConfig(
        iterations=int(train_doc.get("iterations", 5000)),
        batch_size=int(train_doc.get("batch_size", 8)),
        lr=float(train_doc.get("lr", 1e-3)),
        lr_patch=int(train_doc.get("lr_patch", 16)),
        seed=int(train_doc.get("seed", 0)),
        augment=bool(train_doc.get("augment", True)),
        checkpoint_every=int(train_doc.get("checkpoint_every", 1000)),
        log_every=int(train_doc.get("log_every", 50)),
    )
    flag = getattr(args, iterations_flag, None)
    if flag is not None:
        tcfg.iterations = flag
    if getattr(args, "seed", None) is not None:
        tcfg.seed = args.seed
    if getattr(args, "batch", None) is not None:
        tcfg.batch_size = args.batch
    if getattr(args, "patch", None) is not None:
        tcfg.lr_patch = args.patch
    if getattr(args, "lr", None) is not None:
        tcfg.lr = args.lr
    return tcfg


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    from dataclasses import asdict

    from .report import save_loss_curve
    from .trainer import DatasetSpec, save_state, train, write_loss_csv

    config, train_doc = _load_network_config(args)
    tcfg = _train_config(args, train_doc)
    out = Path(args.out)
    cache_dir = args.cache or str(out.parent / f"{out.stem}_cache")
    spec = DatasetSpec(hr_dir=args.data, scale=config.scale, cache_dir=cache_dir)
    _print_config(
        "train",
        {"network": config.to_dict(), "train": asdict(tcfg), "data": args.data, "out": str(out)},
    )
    state = train(config, tcfg, spec)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_state(state, out)
    csv_path = out.with_suffix(out.suffix + ".loss.csv")
    write_loss_csv(state.loss_log, csv_path)
    if state.loss_log:
        save_loss_curve(state.loss_log, out.with_suffix(out.suffix + ".loss.png"))
        first = state.loss_log[0][1]
        last = state.loss_log[-1][1]
        print(f"loss: {first:.6g} -> {last:.6g} over {tcfg.iterations} iterations")
    print(f"checkpoint written: {out}")
    print(f"loss log written: {csv_path}")
    return 0


def cmd_export(args) -> int:
    from .lutpack import format_bytes, transfer, write_pack
    from .refnet import load_checkpoint

    if args.interval != 4:
        raise ConfigError(f"only the 2^4 caching interval is supported, got 2^{args.interval}")
    _print_config(
        "export",
        {
            "ckpt": args.ckpt,
            "out": args.out,
            "interval": args.interval,
            "finetune_iters": args.finetune_iters,
            "finetune_lr": args.finetune_lr,
            "data": args.data,
            "seed": args.seed,
        },
    )
    net, _, _ = load_checkpoint(args.ckpt)
    pack = transfer(net)
    if args.finetune_iters:
        from .trainer import DatasetSpec, TrainConfig, lut_aware_finetune

        if not args.data:
            raise ConfigError("--finetune-iters needs --data for the finetuning set")
        out = Path(args.out)
        tcfg = TrainConfig(
            iterations=args.finetune_iters,
            batch_size=args.batch or 8,
            lr=args.finetune_lr,
            lr_patch=args.patch or 16,
            seed=args.seed or 0,
        )
        spec = DatasetSpec(
            hr_dir=args.data,
            scale=net.config.scale,
            cache_dir=args.cache or str(out.parent / f"{out.stem}_cache"),
        )
        pack = lut_aware_finetune(pack, spec, tcfg)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_pack(pack, args.out)
    total = 0
    for table_id, _, table in pack.table_items():
        print(f"  {table_id:<28} {table.nbytes:>9} B")
        total += table.nbytes
    print(f"total: {total} B ({format_bytes(total)})")
    print(f"pack written: {args.out}")
    return 0


def cmd_upscale(args) -> int:
    from .imagecore import load_png, save_png
    from .lutengine import upscale
    from .lutpack import read_pack

    _print_config("upscale", {"lut": args.lut, "in": args.input, "out": args.out})
    pack = read_pack(args.lut)
    image = load_png(args.input)
    t0 = time.perf_counter()
    sr = upscale(image, pack)
    wall = time.perf_counter() - t0
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_png(sr, args.out)
    mpix = sr.width * sr.height / 1e6
    print(f"{image.width}x{image.height} -> {sr.width}x{sr.height} (x{pack.scale})")
    print(f"wall: {wall * 1000.0:.1f} ms  ({mpix / wall:.2f} output megapixels/s)")
    print(f"written: {args.out}")
    return 0


def cmd_eval(args) -> int:
    from .metrics import evaluate, write_report_csv, write_report_json
    from .report import save_eval_chart

    modes = [bool(args.lut), args.bicubic, args.passthrough]
    if sum(modes) != 1:
        raise ConfigError("pick exactly one of --lut, --bicubic, --passthrough")
    if args.lut:
        from .lutengine import upscale
        from .lutpack import read_pack

        pack = read_pack(args.lut)
        scale = pack.scale
        if args.scale is not None and args.scale != scale:
            raise ConfigError(f"--scale {args.scale} disagrees with the pack's x{scale}")
        sr_fn = lambda lr: upscale(lr, pack)  # noqa: E731
        mode = f"lut:{args.lut}"
    elif args.bicubic:
        from .imagecore import resize_image

        scale = args.scale or 4
        sr_fn = lambda lr: resize_image(lr, lr.width * scale, lr.height * scale)  # noqa: E731
        mode = "bicubic"
    else:
        scale = args.scale or 4
        sr_fn = None
        mode = "passthrough"
    _print_config(
        "eval",
        {"mode": mode, "dataset": args.dataset, "scale": scale, "report": args.report},
    )
    report = evaluate(sr_fn, args.dataset, scale)
    for rec in report.records:
        print(f"  {rec.name:<24} psnr {rec.psnr:7.3f} dB  ssim {rec.ssim:.4f}")
    print(f"mean: psnr {report.mean_psnr:.4f} dB  ssim {report.mean_ssim:.4f}")
    if args.report:
        prefix = Path(args.report)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        write_report_csv(report, prefix.with_suffix(".csv"))
        write_report_json(report, prefix.with_suffix(".json"))
        save_eval_chart(report, prefix.with_suffix(".png"))
        print(f"report written: {prefix}.{{csv,json,png}}")
    return 0


def cmd_rf(args) -> int:
    from .refnet import receptive_field

    config, _ = _load_network_config(args)
    _print_config("rf", {"network": config.to_dict()})
    rf = receptive_field(config)
    print(f"receptive field: {rf} ({rf}x{rf})")
    return 0


def cmd_size(args) -> int:
    from .lutpack import format_bytes, size_formula

    _print_config("size", {"kind": args.kind, "n": args.n, "r": args.r})
    count = size_formula(args.kind, args.n, args.r)
    print(f"{count} B ({format_bytes(count)})")
    return 0


def cmd_inspect(args) -> int:
    from .lutpack import format_bytes, read_pack

    _print_config("inspect", {"lut": args.lut})
    pack = read_pack(args.lut)  # checksum verified on read
    print(f"scale: x{pack.scale}, stages: {len(pack.stages)}")
    total = 0
    for si, stage in enumerate(pack.stages):
        for bi, bt in enumerate(stage):
            kind = type(bt.block).__name__
            rc = f"rc{bt.rc_kernel} ({len(bt.rc)} tables)" if bt.rc else "no rc"
            print(f"  stage {si} branch {bi}: {rc}, block {kind}"
                  f" ({bt.block.out_channels} ch), {bt.nbytes} B")
            total += bt.nbytes
    print(f"tables: {sum(1 for _ in pack.table_items())}")
    print(f"total: {total} B ({format_bytes(total)})")
    print("crc: ok")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_config_flags(sub):
    sub.add_argument("--config", help="JSON config document (network + train sections)")
    sub.add_argument("--preset", help="named network preset (default rclut-default)")


def build_parser() -> _Parser:
    parser = _Parser(prog="rclut", description=__doc__)
    parser.add_argument("--threads", type=int, default=None,
                        help="cap math worker threads (env RCLUT_THREADS as fallback)")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("train", help="fit the reference network")
    _add_config_flags(p)
    p.add_argument("--data", required=True, help="directory of HR PNGs")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--patch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--cache", default=None, help="derived-plane cache directory")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("export", help="cache a checkpoint into a LUT pack")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True, help=".rclt output path")
    p.add_argument("--interval", type=int, default=4, help="sampling interval exponent (only 4)")
    p.add_argument("--finetune-iters", type=int, default=0)
    p.add_argument("--finetune-lr", type=float, default=0.05,
                   help="entry-domain learning rate (levels/step)")
    p.add_argument("--data", default=None, help="finetuning dataset (HR PNGs)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--patch", type=int, default=None)
    p.add_argument("--cache", default=None)
    p.set_defaults(func=cmd_export)

    p = subs.add_parser("upscale", help="run LUT-only upscaling on one PNG")
    p.add_argument("--lut", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_upscale)

    p = subs.add_parser("eval", help="PSNR/SSIM over a directory of HR PNGs")
    p.add_argument("--lut", default=None)
    p.add_argument("--bicubic", action="store_true")
    p.add_argument("--passthrough", action="store_true",
                   help="score ground truth against itself (sanity mode)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--scale", type=int, default=None)
    p.add_argument("--report", default=None, help="report path prefix (.csv/.json/.png)")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("rf", help="receptive-field size of a config")
    _add_config_flags(p)
    p.set_defaults(func=cmd_rf)

    p = subs.add_parser("size", help="LUT size estimation")
    p.add_argument("--kind", required=True, choices=["full_srlut", "sampled_srlut", "full_1d"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.set_defaults(func=cmd_size)

    p = subs.add_parser("inspect", help="print a pack's manifest and verify its checksum")
    p.add_argument("--lut", required=True)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        threads = args.threads
        if threads is None and os.environ.get("RCLUT_THREADS"):
            try:
                threads = int(os.environ["RCLUT_THREADS"])
            except ValueError:
                raise ConfigError("RCLUT_THREADS must be an integer") from None
        if threads is not None:
            if threads < 1:
                raise ConfigError("--threads must be >= 1")
            for var in _THREAD_VARS:
                os.environ[var] = str(threads)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CorruptPackError as exc:
        print(f"corrupt artifact: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
