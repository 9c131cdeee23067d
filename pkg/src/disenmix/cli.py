"""Command line interface.

Verbs:
  gen-data    write a synthetic benchmark dataset to an FFDS file
  train       run the configured schemes across folds and emit reports
  synthesize  render mixture samples from a checkpoint for inspection
  evaluate    score a checkpoint's classifier on a dataset file
  report      re-emit report files from saved results.json
  selftest    quick numerical self-checks, one PASS/FAIL line each

``train`` reads an optional flat JSON config file; every field can be
overridden by a flag of the same name. Exit codes: 0 success, 2 config
error, 3 data/format error, 4 numeric failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .data import Dataset, Sample, generate_synthetic, load_dataset, save_dataset
from .errors import ConfigError, DataError, DisenmixError, FormatError, NumericError
from .harness import RunConfig, emit_report, evaluate, load_checkpoint, run_experiment
from .mixture import build_code_bank, synthesize_batch
from .models import ArchProfile
from .seeding import derive_rng


def _parse_counts(text: str) -> tuple[int, ...]:
    try:
        counts = tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"counts must be comma-separated integers, got {text!r}") from exc
    if not counts:
        raise ConfigError("counts must be nonempty")
    return counts


def _add_run_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="flat JSON config file with RunConfig fields")
    for f in dataclasses.fields(RunConfig):
        flag = "--" + f.name.replace("_", "-").rstrip("-")
        kind = str(f.type)
        if f.name in ("counts", "channels"):
            parser.add_argument(flag, type=_parse_counts, default=None, dest=f.name)
        elif kind.startswith("int"):
            parser.add_argument(flag, type=int, default=None, dest=f.name)
        elif kind.startswith("float"):
            parser.add_argument(flag, type=float, default=None, dest=f.name)
        else:
            parser.add_argument(flag, type=str, default=None, dest=f.name)


def _run_config_from_args(args) -> RunConfig:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a flat JSON object")
    for f in dataclasses.fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            raw[f.name] = value
    cfg = RunConfig.from_dict(raw)
    cfg.validate()
    return cfg


def _cmd_gen_data(args) -> int:
    profile = ArchProfile(
        image_size=args.image_size,
        channels=_default_channels(args.image_size),
        code_dim=32,
        decoder_seed_hw=4,
        class_count=len(args.counts),
    )
    ds = generate_synthetic(args.counts, profile, seed=args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {len(ds)} samples ({'/'.join(str(c) for c in args.counts)}) to {args.out}")
    return 0


def _default_channels(image_size: int) -> tuple[int, ...]:
    stages = max(1, int(np.log2(image_size // 4)))
    return tuple(min(16 * 2**i, 64) for i in range(stages))


def _cmd_train(args) -> int:
    cfg = _run_config_from_args(args)
    out_dir = Path(cfg.out_dir)
    results = run_experiment(cfg, out_dir=out_dir)
    emit_report(results, out_dir)
    for scheme, agg in sorted(results["aggregate"].items()):
        print(f"{scheme}: mean accuracy {100 * agg['mean']:.2f}% "
              f"(population sd {100 * agg['sd_population']:.2f})")
    print(f"report written to {out_dir}")
    return 0


def _cmd_synthesize(args) -> int:
    bundle, _, _ = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    if ds.class_count != bundle.profile.class_count:
        raise ConfigError(
            f"dataset has {ds.class_count} classes, checkpoint expects {bundle.profile.class_count}"
        )
    bank = build_code_bank(ds, bundle.e_c)
    images, targets = synthesize_batch(
        ds.samples, bank, bundle.e_c, bundle.e_r, bundle.g_r,
        seed=args.seed, epoch=0, alpha=args.alpha, per_sample=args.per_sample,
    )
    samples = [
        Sample(img, int(tgt.argmax()), tgt, i)
        for i, (img, tgt) in enumerate(zip(images, targets))
    ]
    save_dataset(Dataset(samples, ds.class_names, ds.image_size), args.out)
    print(f"wrote {len(samples)} synthesized samples to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    bundle, _, _ = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    acc, cm, _ = evaluate(harness.ClassifierPipeline(bundle.e_c, bundle.classifier), ds)
    print(f"accuracy: {acc:.4f} ({int(np.trace(cm.counts))}/{cm.total})")
    print(cm.to_text(ds.class_names))
    return 0


def _cmd_report(args) -> int:
    try:
        results = json.loads(Path(args.results).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read results file {args.results}: {exc}") from exc
    written = emit_report(results, args.out_dir)
    print("\n".join(str(p) for p in written))
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return run_selftest()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="disenmix", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic benchmark dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--counts", type=_parse_counts, default=(66, 81, 65, 27))
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="run the experiment and emit reports")
    _add_run_config_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("synthesize", help="dump mixture samples for inspection")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--per-sample", type=int, default=1)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="re-emit reports from results.json")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("selftest", help="quick numerical self-checks")
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except DisenmixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
