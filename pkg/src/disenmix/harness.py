"""Experiment orchestration: folds, schemes, metrics, checkpoints, reports.

``run_experiment`` executes a paired comparison: for every fold, a
baseline classifier trained on affine-augmented real data only, and a
proposed classifier trained on the same real stream plus per-epoch
mixture-synthesized samples with proportional soft targets. Both arms
share the fold plan, the classifier initialization, and the augmentation
streams, so the only difference is the synthetic data.

Everything emitted (reports, logs, checkpoints, plots) is a pure function
of the run configuration and seed; no timestamps or absolute paths appear
in any output.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    AffineRanges,
    Dataset,
    generate_synthetic,
    kfold_split,
    load_dataset,
)
from .errors import ConfigError, DataError, FormatError, VersionError
from .mixture import build_code_bank, synthesize_batch
from .models import ArchProfile, ClassifierHead, Encoder, ModelBundle, build_models
from .seeding import derive_rng
from .training import TrainConfig, TrainLog, forward_probs, train_step1, train_step2

FFCK_MAGIC = b"FFCK"
FFCK_VERSION = 1

SCHEMES = ("baseline", "proposed")


# -- metrics --------------------------------------------------------------------


@dataclass
class ConfusionMatrix:
    """Rows are ground truth, columns are predictions."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise DataError(f"confusion matrix must be square, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise DataError("confusion matrix counts must be nonnegative")

    @classmethod
    def from_predictions(cls, y_true, y_pred, class_count: int) -> "ConfusionMatrix":
        counts = np.zeros((class_count, class_count), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            counts[int(t), int(p)] += 1
        return cls(counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def to_text(self, class_names) -> str:
        width = max(9, max(len(n) for n in class_names) + 1)
        header = "gt\\pred".ljust(width) + "".join(n.rjust(width) for n in class_names)
        lines = [header]
        for i, name in enumerate(class_names):
            lines.append(name.ljust(width) + "".join(str(int(v)).rjust(width) for v in self.counts[i]))
        return "\n".join(lines)


@dataclass
class ClassifierPipeline:
    """An encoder plus classifier head, evaluated end to end."""

    e_c: Encoder
    head: ClassifierHead

    def predict_proba(self, images: np.ndarray) -> np.ndarray:
        return forward_probs(self.e_c, self.head, images)


def evaluate(pipeline: ClassifierPipeline, split: Dataset):
    """Eval-mode accuracy, confusion matrix, and per-sample predictions.

    Predictions are the argmax with ties broken toward the lowest index.
    """
    if len(split) == 0:
        raise DataError("cannot evaluate on an empty split")
    probs = pipeline.predict_proba(split.images())
    preds = probs.argmax(axis=1)
    labels = split.labels()
    cm = ConfusionMatrix.from_predictions(labels, preds, split.class_count)
    per_sample = [(s.id, int(p)) for s, p in zip(split.samples, preds)]
    return cm.accuracy(), cm, per_sample


@dataclass
class FoldAggregate:
    mean: float
    sd_sample: float  # n-1 denominator
    sd_population: float  # n denominator


def aggregate_folds(accuracies) -> FoldAggregate:
    """Mean plus both flavors of standard deviation across folds."""
    accs = [float(a) for a in accuracies]
    if len(accs) < 2:
        raise DataError(f"need at least 2 folds to aggregate, got {len(accs)}")
    mean = sum(accs) / len(accs)
    sq = sum((a - mean) ** 2 for a in accs)
    return FoldAggregate(
        mean=mean,
        sd_sample=math.sqrt(sq / (len(accs) - 1)),
        sd_population=math.sqrt(sq / len(accs)),
    )


# -- checkpoints -------------------------------------------------------------------
#
# magic "FFCK" | version u16 | image_size u16 | seed_hw u16 | code_dim u32
# class_count u16 | stage_count u16 | channel u32 per stage | seed u64 | epoch u32
# block_count u32, then per block:
#   name_len u16 | name UTF-8 | ndim u8 | dim u32 per axis | payload f32 LE
# All little-endian.


def _profile_tuple(profile: ArchProfile):
    return (profile.image_size, profile.decoder_seed_hw, profile.code_dim, profile.class_count, profile.channels)


def save_checkpoint(bundle: ModelBundle, path, seed: int = 0, epoch: int = 0):
    p = bundle.profile
    parts = [
        FFCK_MAGIC,
        struct.pack("<HHHIHH", FFCK_VERSION, p.image_size, p.decoder_seed_hw, p.code_dim, p.class_count, len(p.channels)),
    ]
    for c in p.channels:
        parts.append(struct.pack("<I", c))
    blocks = []
    for net_name, net in bundle.networks():
        for arr_name, arr in net.named_arrays():
            blocks.append((f"{net_name}.{arr_name}", arr))
    parts.append(struct.pack("<QII", seed, epoch, len(blocks)))
    for name, arr in blocks:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        for d in arr.shape:
            parts.append(struct.pack("<I", d))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path, expect_profile: ArchProfile | None = None) -> tuple[ModelBundle, int, int]:
    """Rebuild a model bundle from a checkpoint file.

    Returns (bundle, seed, epoch). With ``expect_profile`` set, a stored
    profile that differs is rejected with the full difference.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise FormatError(f"truncated checkpoint while reading {what}", offset=pos)
        out = blob[pos : pos + n]
        pos += n
        return out

    magic = take(4, "magic")
    if magic != FFCK_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FFCK_MAGIC!r}", offset=0)
    version, image_size, seed_hw, code_dim, class_count, stages = struct.unpack("<HHHIHH", take(14, "header"))
    if version != FFCK_VERSION:
        raise VersionError(f"unsupported checkpoint version {version}", offset=4)
    channels = tuple(struct.unpack("<I", take(4, "channel width"))[0] for _ in range(stages))
    profile = ArchProfile(
        image_size=image_size,
        channels=channels,
        code_dim=code_dim,
        decoder_seed_hw=seed_hw,
        class_count=class_count,
    )
    if expect_profile is not None and _profile_tuple(expect_profile) != _profile_tuple(profile):
        raise ConfigError(
            f"checkpoint profile {profile} does not match expected profile {expect_profile}"
        )
    seed, epoch, block_count = struct.unpack("<QII", take(16, "trailer"))
    blocks: dict[str, np.ndarray] = {}
    for _ in range(block_count):
        (name_len,) = struct.unpack("<H", take(2, "block name length"))
        name = take(name_len, "block name").decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1, f"block {name!r} rank"))
        shape = tuple(struct.unpack("<I", take(4, f"block {name!r} dim"))[0] for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        payload = take(4 * count, f"block {name!r} payload")
        blocks[name] = np.frombuffer(payload, dtype="<f4").copy().reshape(shape)
    if pos != len(blob):
        raise FormatError(f"{len(blob) - pos} trailing bytes", offset=pos)

    bundle = build_models(profile, derive_rng(0, "checkpoint-load"))
    for net_name, net in bundle.networks():
        prefix = net_name + "."
        net.load_named_arrays({k[len(prefix) :]: v for k, v in blocks.items() if k.startswith(prefix)})
    return bundle, seed, epoch


# -- run configuration ---------------------------------------------------------------


@dataclass
class RunConfig:
    """Everything one experiment needs; JSON-serializable, flag-overridable."""

    dataset_path: str | None = None
    counts: tuple[int, ...] = (66, 81, 65, 27)
    image_size: int = 32
    channels: tuple[int, ...] = (16, 32, 64)
    code_dim: int = 32
    decoder_seed_hw: int = 4
    scheme: str = "both"  # baseline | proposed | both
    k: int = 3
    val_fraction: float = 0.30
    views_per_sample: int = 10
    epochs_step1: int = 14
    epochs_step2: int = 25
    classifier_epochs: int = 14
    batch_size: int = 32
    lr: float = 1e-3
    lambda_: float = -0.1
    adv_updates_per_gen_update: int = 1
    early_stop_patience: int = 0
    alpha: float = 1.0
    synth_per_real: int = 1
    neighbor_top_k: int = 1
    seed: int = 0
    out_dir: str = "runs/latest"

    def validate(self):
        if self.scheme not in ("baseline", "proposed", "both"):
            raise ConfigError(f"scheme must be baseline, proposed, or both, got {self.scheme!r}")
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        if self.views_per_sample < 1:
            raise ConfigError("views_per_sample must be positive")
        if self.synth_per_real < 0:
            raise ConfigError("synth_per_real must be nonnegative")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        self.profile()
        self.train_config(0).validate()

    def profile(self) -> ArchProfile:
        class_count = len(self.counts)
        return ArchProfile(
            image_size=self.image_size,
            channels=tuple(self.channels),
            code_dim=self.code_dim,
            decoder_seed_hw=self.decoder_seed_hw,
            class_count=class_count,
        )

    def train_config(self, seed: int, epochs1: int | None = None) -> TrainConfig:
        return TrainConfig(
            lambda_=self.lambda_,
            epochs_step1=self.epochs_step1 if epochs1 is None else epochs1,
            epochs_step2=self.epochs_step2,
            batch_size=self.batch_size,
            lr=self.lr,
            adv_updates_per_gen_update=self.adv_updates_per_gen_update,
            seed=seed,
            early_stop_patience=self.early_stop_patience,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["counts"] = list(self.counts)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(raw)
        for key in ("counts", "channels"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


def _sub_seed(seed: int, *key) -> int:
    return int(derive_rng(seed, *key).integers(0, 2**63 - 1))


def _load_or_generate(cfg: RunConfig) -> Dataset:
    if cfg.dataset_path:
        ds = load_dataset(cfg.dataset_path)
        if ds.image_size != cfg.image_size:
            raise ConfigError(
                f"dataset images are {ds.image_size}x{ds.image_size}, config expects {cfg.image_size}"
            )
        return ds
    return generate_synthetic(cfg.counts, cfg.profile(), seed=_sub_seed(cfg.seed, "dataset"))


# -- the experiment ---------------------------------------------------------------------


def run_fold_baseline(cfg: RunConfig, fold: int, tr: Dataset, va: Dataset) -> tuple[ModelBundle, TrainLog]:
    bundle = build_models(cfg.profile(), derive_rng(cfg.seed, "classifier-init", fold))
    tcfg = cfg.train_config(_sub_seed(cfg.seed, "classifier-train", fold), epochs1=cfg.classifier_epochs)
    log = train_step1(
        tr, va, bundle.e_c, bundle.classifier, tcfg,
        views_per_sample=cfg.views_per_sample, affine=AffineRanges(),
    )
    return bundle, log


def run_fold_proposed(
    cfg: RunConfig, fold: int, tr: Dataset, va: Dataset
) -> tuple[ModelBundle, TrainLog, TrainLog, TrainLog]:
    """Two-step disentanglement, then a fresh classifier on real + mixtures."""
    disen = build_models(cfg.profile(), derive_rng(cfg.seed, "disentangle-init", fold))
    dcfg = cfg.train_config(_sub_seed(cfg.seed, "disentangle-train", fold))
    log1 = train_step1(tr, va, disen.e_c, disen.classifier, dcfg,
                       views_per_sample=cfg.views_per_sample, affine=AffineRanges())
    log2 = train_step2(tr, va, disen.e_c, disen.e_r, disen.g_r, disen.adv_classifier, dcfg)
    bank = build_code_bank(tr, disen.e_c)

    synth_seed = _sub_seed(cfg.seed, "mixture", fold)

    def extra(epoch: int):
        if cfg.synth_per_real == 0:
            return np.zeros((0, 1, cfg.image_size, cfg.image_size), np.float32), np.zeros((0, len(cfg.counts)), np.float32)
        return synthesize_batch(
            tr.samples, bank, disen.e_c, disen.e_r, disen.g_r,
            seed=synth_seed, epoch=epoch, alpha=cfg.alpha,
            per_sample=cfg.synth_per_real, top_k=cfg.neighbor_top_k,
        )

    final = build_models(cfg.profile(), derive_rng(cfg.seed, "classifier-init", fold))
    tcfg = cfg.train_config(_sub_seed(cfg.seed, "classifier-train", fold), epochs1=cfg.classifier_epochs)
    log3 = train_step1(
        tr, va, final.e_c, final.classifier, tcfg,
        views_per_sample=cfg.views_per_sample, affine=AffineRanges(),
        extra_per_epoch=extra,
    )
    # carry the disentanglement networks alongside the final classifier
    final.e_r = disen.e_r
    final.g_r = disen.g_r
    final.adv_classifier = disen.adv_classifier
    return final, log1, log2, log3


def run_experiment(cfg: RunConfig, out_dir: str | Path | None = None) -> dict:
    """Run the configured schemes over all folds and collect metrics.

    With ``out_dir`` set, also persists checkpoints and per-fold training
    logs there. Returns the results dictionary consumed by
    :func:`emit_report`.
    """
    cfg.validate()
    dataset = _load_or_generate(cfg)
    if len(dataset) == 0:
        raise DataError("experiment dataset is empty")
    plan = kfold_split(dataset, k=cfg.k, seed=_sub_seed(cfg.seed, "folds"), val_fraction=cfg.val_fraction)
    schemes = SCHEMES if cfg.scheme == "both" else (cfg.scheme,)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    results: dict = {
        "config": cfg.to_dict(),
        "class_names": list(dataset.class_names),
        "folds": [],
        "aggregate": {},
        "pooled_confusion": {},
    }
    pooled = {s: None for s in schemes}
    for fold in range(cfg.k):
        train_ids, val_ids, test_ids = plan.fold_ids(fold)
        tr, va, te = dataset.subset(train_ids), dataset.subset(val_ids), dataset.subset(test_ids)
        fold_entry: dict = {
            "fold": fold,
            "sizes": {"train": len(tr), "val": len(va), "test": len(te)},
        }
        for scheme in schemes:
            if scheme == "baseline":
                bundle, log = run_fold_baseline(cfg, fold, tr, va)
                logs = {"classifier": log.records}
            else:
                bundle, log1, log2, log3 = run_fold_proposed(cfg, fold, tr, va)
                logs = {"step1": log1.records, "step2": log2.records, "classifier": log3.records}
            acc, cm, preds = evaluate(ClassifierPipeline(bundle.e_c, bundle.classifier), te)
            fold_entry[scheme] = {
                "accuracy": acc,
                "confusion": cm.counts.tolist(),
                "predictions": preds,
            }
            pooled[scheme] = cm if pooled[scheme] is None else pooled[scheme] + cm
            if out_path is not None:
                save_checkpoint(bundle, out_path / f"{scheme}_fold{fold}.ffck", seed=cfg.seed, epoch=fold)
                for log_name, records in logs.items():
                    TrainLog(records=list(records)).write_jsonl(
                        out_path / f"{scheme}_fold{fold}_{log_name}.jsonl"
                    )
            fold_entry.setdefault("logs", {})[scheme] = logs
        results["folds"].append(fold_entry)

    for scheme in schemes:
        accs = [f[scheme]["accuracy"] for f in results["folds"]]
        agg = aggregate_folds(accs)
        results["aggregate"][scheme] = {
            "mean": agg.mean,
            "sd_sample": agg.sd_sample,
            "sd_population": agg.sd_population,
        }
        results["pooled_confusion"][scheme] = pooled[scheme].counts.tolist()
    return results


# -- reporting ------------------------------------------------------------------------


def _accuracy_table(results: dict) -> str:
    schemes = [s for s in SCHEMES if s in results["aggregate"]]
    lines = ["Accuracy by fold [%]", ""]
    header = "fold".ljust(8) + "".join(s.rjust(12) for s in schemes)
    lines.append(header)
    for entry in results["folds"]:
        row = str(entry["fold"] + 1).ljust(8)
        for s in schemes:
            row += f"{100.0 * entry[s]['accuracy']:.4f}".rjust(12)
        lines.append(row)
    avg = "avg".ljust(8)
    spread = "+-".ljust(8)
    for s in schemes:
        agg = results["aggregate"][s]
        avg += f"{100.0 * agg['mean']:.4f}".rjust(12)
        spread += f"{100.0 * agg['sd_population']:.4f}".rjust(12)
    lines.append(avg)
    lines.append(spread + "    (population sd; sample sd: "
                 + ", ".join(f"{s}={100.0 * results['aggregate'][s]['sd_sample']:.4f}" for s in schemes)
                 + ")")
    return "\n".join(lines)


def render_report_text(results: dict) -> str:
    names = results["class_names"]
    parts = [_accuracy_table(results), ""]
    for entry in results["folds"]:
        for s in SCHEMES:
            if s not in entry:
                continue
            parts.append(f"Confusion, fold {entry['fold'] + 1}, {s} "
                         f"(accuracy {entry[s]['accuracy']:.4f})")
            parts.append(ConfusionMatrix(np.array(entry[s]["confusion"])).to_text(names))
            parts.append("")
    for s, counts in sorted(results["pooled_confusion"].items()):
        cm = ConfusionMatrix(np.array(counts))
        parts.append(f"Confusion, pooled over folds, {s} (accuracy {cm.accuracy():.4f})")
        parts.append(cm.to_text(names))
        parts.append("")
    return "\n".join(parts)


def _plot_curves(results: dict, path: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "disenmix"
    schemes = [s for s in SCHEMES if s in results["aggregate"]]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for entry in results["folds"]:
        for s in schemes:
            recs = entry.get("logs", {}).get(s, {}).get("classifier", [])
            if recs:
                axes[0].plot(
                    [r["epoch"] for r in recs],
                    [r["val_acc"] for r in recs],
                    label=f"{s} fold {entry['fold'] + 1}",
                    linestyle="-" if s == "baseline" else "--",
                )
    axes[0].set_xlabel("epoch")
    axes[0].set_ylabel("validation accuracy")
    axes[0].legend(fontsize=6)
    positions = np.arange(len(results["folds"]))
    width = 0.8 / max(len(schemes), 1)
    for i, s in enumerate(schemes):
        accs = [f[s]["accuracy"] for f in results["folds"]]
        axes[1].bar(positions + i * width, accs, width=width, label=s)
    axes[1].set_xticks(positions + width * (len(schemes) - 1) / 2)
    axes[1].set_xticklabels([str(f["fold"] + 1) for f in results["folds"]])
    axes[1].set_xlabel("fold")
    axes[1].set_ylabel("test accuracy")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_report(results: dict, out_dir) -> list[Path]:
    """Write machine-readable results, a text report, and plots.

    Re-emitting from the same results dictionary is byte-identical.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    results_path = out / "results.json"
    with open(results_path, "w") as fh:
        json.dump(results, fh, sort_keys=True, indent=2)
        fh.write("\n")
    written.append(results_path)
    report_path = out / "report.txt"
    report_path.write_text(render_report_text(results))
    written.append(report_path)
    plot_path = out / "curves.svg"
    _plot_curves(results, plot_path)
    written.append(plot_path)
    return written
