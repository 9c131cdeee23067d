"""The two-step training procedure.

Step 1 trains the class-specified encoder and its classifier head with
cross entropy. Step 2 freezes that encoder and trains the unspecified
encoder plus the decoder against reconstruction loss combined with a
negatively weighted adversarial classification loss, while the adversarial
classifier itself is trained, in alternation, to predict the class from the
unspecified code. The negative weight rewards codes the adversary cannot
classify, which is what strips label information out of them.

Per batch, step 2 runs the adversary's own updates first (on detached
codes), then one generator update. The generator's adversarial term runs
the adversary in eval mode so its running statistics stay untouched, and
its gradient reaches only the unspecified encoder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import AffineRanges, Dataset, augmented_epoch
from .errors import ConfigError, DataError, NumericError
from .models import ClassifierHead, Decoder, Encoder
from .seeding import derive_rng
from .tensor import Adam, LossBreakdown, Tensor, concat, cross_entropy, mse_loss, no_grad


@dataclass
class TrainConfig:
    """Knobs shared by both training steps."""

    lambda_: float = -0.1  # weight on the adversarial loss; must stay negative
    epochs_step1: int = 20
    epochs_step2: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    adv_updates_per_gen_update: int = 1
    seed: int = 0
    early_stop_patience: int = 0  # 0 disables early stopping

    def validate(self):
        if self.lambda_ >= 0:
            raise ConfigError(f"lambda_ must be negative, got {self.lambda_}")
        if self.epochs_step1 < 0 or self.epochs_step2 < 0:
            raise ConfigError("epoch counts must be nonnegative")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be at least 2, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.adv_updates_per_gen_update < 1:
            raise ConfigError("adv_updates_per_gen_update must be positive")
        if self.early_stop_patience < 0:
            raise ConfigError("early_stop_patience must be nonnegative")


@dataclass
class TrainLog:
    """One record per completed epoch, dumpable as line-delimited JSON."""

    records: list[dict] = field(default_factory=list)

    def append(self, **fields):
        for v in fields.values():
            if isinstance(v, float) and not np.isfinite(v):
                raise NumericError(f"non-finite value in training log: {fields}")
        self.records.append(fields)

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def __len__(self):
        return len(self.records)


def combine_losses(rec, adv, lambda_: float) -> LossBreakdown:
    """Weighted objective ``rec + lambda_ * adv`` with a sign check.

    Accepts floats or scalar tensors; with tensors the ``total`` carries
    the graph so it can be backpropagated.
    """
    if lambda_ >= 0:
        raise ConfigError(f"adversarial weight must be negative, got {lambda_}")
    rec_val = rec.item() if isinstance(rec, Tensor) else float(rec)
    adv_val = adv.item() if isinstance(adv, Tensor) else float(adv)
    if rec_val < 0 or adv_val < 0:
        raise ConfigError("loss terms must be nonnegative")
    return LossBreakdown(rec=rec, adv=adv, weight=lambda_)


def _epoch_arrays(
    train: Dataset,
    epoch: int,
    seed: int,
    views_per_sample: int,
    affine: AffineRanges | None,
) -> tuple[np.ndarray, np.ndarray]:
    if views_per_sample > 1 or affine is not None:
        ranges = affine or AffineRanges()
        rows = list(augmented_epoch(train.samples, views_per_sample, seed, epoch, ranges))
        images = np.stack([r[0] for r in rows])
        targets = np.stack([r[1] for r in rows])
    else:
        images = train.images()
        targets = train.targets()
    return images, targets


def _batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    idx = rng.permutation(n)
    out = [idx[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(out) > 1 and len(out[-1]) == 1:
        # batchnorm cannot normalize a singleton; fold it into the previous batch
        out[-2] = np.concatenate([out[-2], out[-1]])
        out.pop()
    return out


def forward_probs(e_c: Encoder, head: ClassifierHead, images: np.ndarray, batch_size: int = 128) -> np.ndarray:
    """Eval-mode class probabilities for a stack of images."""
    chunks = []
    with no_grad():
        for i in range(0, len(images), batch_size):
            code = e_c.forward(Tensor(images[i : i + batch_size]))
            chunks.append(head.forward(code, mode="eval").data)
    return np.concatenate(chunks, axis=0)


def _classification_metrics(e_c, head, images, targets) -> tuple[float, float]:
    probs = forward_probs(e_c, head, images)
    loss = cross_entropy(Tensor(probs), targets).item()
    acc = float((probs.argmax(axis=1) == targets.argmax(axis=1)).mean())
    return loss, acc


def train_step1(
    train: Dataset,
    val: Dataset,
    e_c: Encoder,
    classifier: ClassifierHead,
    cfg: TrainConfig,
    views_per_sample: int = 1,
    affine: AffineRanges | None = None,
    extra_per_epoch=None,
) -> TrainLog:
    """Train the class-specified encoder and classifier on cross entropy.

    The parameters with the best validation accuracy are restored at the
    end. Deterministic given ``cfg.seed``.

    ``extra_per_epoch(epoch) -> (images, targets)`` injects additional
    (typically synthesized) samples into each epoch without touching the
    real-data stream, so two runs differing only in this hook see the
    same augmented real data.
    """
    cfg.validate()
    if len(train) == 0 or len(val) == 0:
        raise DataError("train and validation splits must be nonempty")
    log = TrainLog()
    if cfg.epochs_step1 == 0:
        return log
    opt = Adam(e_c.parameters() + classifier.parameters(), lr=cfg.lr)
    val_images, val_targets = val.images(), val.targets()
    best = (-1.0, None, None)  # (val accuracy, e_c snapshot, classifier snapshot)
    since_best = 0
    for epoch in range(cfg.epochs_step1):
        images, targets = _epoch_arrays(train, epoch, cfg.seed, views_per_sample, affine)
        if extra_per_epoch is not None:
            extra_images, extra_targets = extra_per_epoch(epoch)
            if len(extra_images):
                images = np.concatenate([images, extra_images.astype(images.dtype)])
                targets = np.concatenate([targets, extra_targets.astype(targets.dtype)])
        shuffle_rng = derive_rng(cfg.seed, "step1-shuffle", epoch)
        epoch_loss = 0.0
        epoch_hits = 0
        for batch in _batches(len(images), cfg.batch_size, shuffle_rng):
            x = Tensor(images[batch])
            t = targets[batch]
            probs = classifier.forward(e_c.forward(x), mode="train")
            loss = cross_entropy(probs, t)
            if not np.isfinite(loss.item()):
                raise NumericError(f"step 1 loss became non-finite at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_loss += loss.item() * len(batch)
            epoch_hits += int((probs.data.argmax(axis=1) == t.argmax(axis=1)).sum())
        val_loss, val_acc = _classification_metrics(e_c, classifier, val_images, val_targets)
        log.append(
            step=1,
            epoch=epoch,
            train_loss=epoch_loss / len(images),
            train_acc=epoch_hits / len(images),
            val_loss=val_loss,
            val_acc=val_acc,
        )
        if val_acc > best[0]:
            best = (val_acc, e_c.snapshot(), classifier.snapshot())
            since_best = 0
        else:
            since_best += 1
            if cfg.early_stop_patience and since_best > cfg.early_stop_patience:
                break
    if best[1] is not None:
        e_c.restore(best[1])
        classifier.restore(best[2])
    return log


def _reconstruction_metrics(e_c, e_r, g_r, adv, images, targets, batch_size=128):
    rec_total = 0.0
    adv_total = 0.0
    hits = 0
    with no_grad():
        for i in range(0, len(images), batch_size):
            x = Tensor(images[i : i + batch_size])
            t = targets[i : i + batch_size]
            r = e_r.forward(x)
            c = e_c.forward(x)
            recon = g_r.forward(concat(c, r), mode="eval")
            rec_total += mse_loss(recon, x).item()
            probs = adv.forward(r, mode="eval")
            adv_total += cross_entropy(probs, t).item() * len(t)
            hits += int((probs.data.argmax(axis=1) == t.argmax(axis=1)).sum())
    n = len(images)
    return rec_total / n, adv_total / n, hits / n


def train_step2(
    train: Dataset,
    val: Dataset,
    e_c: Encoder,
    e_r: Encoder,
    g_r: Decoder,
    adv_classifier: ClassifierHead,
    cfg: TrainConfig,
) -> TrainLog:
    """Adversarial reconstruction training with the specified encoder frozen.

    Per batch: the adversarial classifier takes
    ``adv_updates_per_gen_update`` cross-entropy steps on detached
    unspecified codes, then the unspecified encoder and decoder take one
    step on reconstruction plus the negatively weighted adversarial loss.
    The specified encoder is never updated. Parameters with the best
    validation reconstruction loss are restored at the end.
    """
    cfg.validate()
    if len(train) == 0 or len(val) == 0:
        raise DataError("train and validation splits must be nonempty")
    log = TrainLog()
    if cfg.epochs_step2 == 0:
        return log
    gen_opt = Adam(e_r.parameters() + g_r.parameters(), lr=cfg.lr)
    adv_opt = Adam(adv_classifier.parameters(), lr=cfg.lr)
    images_all, targets_all = train.images(), train.targets()
    val_images, val_targets = val.images(), val.targets()
    best = (np.inf, None, None, None)
    since_best = 0
    for epoch in range(cfg.epochs_step2):
        shuffle_rng = derive_rng(cfg.seed, "step2-shuffle", epoch)
        sums = {"rec": 0.0, "adv": 0.0, "total": 0.0}
        count = 0
        for bi, batch in enumerate(_batches(len(images_all), cfg.batch_size, shuffle_rng)):
            x_np = images_all[batch]
            t = targets_all[batch]
            n = len(batch)

            for _ in range(cfg.adv_updates_per_gen_update):
                with no_grad():
                    r_fixed = e_r.forward(Tensor(x_np))
                adv_probs = adv_classifier.forward(r_fixed, mode="train")
                adv_own_loss = cross_entropy(adv_probs, t)
                if not np.isfinite(adv_own_loss.item()):
                    raise NumericError(f"adversary loss became non-finite at epoch {epoch}")
                adv_opt.zero_grad()
                adv_own_loss.backward()
                adv_opt.step()

            x = Tensor(x_np)
            r = e_r.forward(x)
            with no_grad():
                c = e_c.forward(x)  # frozen encoder: no graph, no updates
            z = concat(c, r)
            drop_rng = derive_rng(cfg.seed, "step2-dropout", epoch, bi)
            recon = g_r.forward(z, mode="train", dropout_rng=drop_rng)
            rec = mse_loss(recon, x) * (1.0 / n)  # per-sample sum, averaged over the batch
            adv_loss = cross_entropy(adv_classifier.forward(r, mode="eval"), t)
            breakdown = combine_losses(rec, adv_loss, cfg.lambda_)
            total = breakdown.total
            if not np.isfinite(total.item()):
                raise NumericError(f"step 2 loss became non-finite at epoch {epoch}")
            gen_opt.zero_grad()
            total.backward()
            gen_opt.step()

            sums["rec"] += rec.item() * n
            sums["adv"] += adv_loss.item() * n
            sums["total"] += total.item() * n
            count += n

        val_rec, val_adv, adv_acc_r = _reconstruction_metrics(
            e_c, e_r, g_r, adv_classifier, val_images, val_targets
        )
        log.append(
            step=2,
            epoch=epoch,
            train_rec=sums["rec"] / count,
            train_adv=sums["adv"] / count,
            train_total=sums["total"] / count,
            val_rec=val_rec,
            val_adv=val_adv,
            val_total=val_rec + cfg.lambda_ * val_adv,
            adv_acc_r=adv_acc_r,
        )
        if val_rec < best[0]:
            best = (val_rec, e_r.snapshot(), g_r.snapshot(), adv_classifier.snapshot())
            since_best = 0
        else:
            since_best += 1
            if cfg.early_stop_patience and since_best > cfg.early_stop_patience:
                break
    if best[1] is not None:
        e_r.restore(best[1])
        g_r.restore(best[2])
        adv_classifier.restore(best[3])
    return log


def reconstruct(e_c: Encoder, e_r: Encoder, g_r: Decoder, x) -> np.ndarray:
    """Decode the concatenated specified+unspecified codes of ``x`` (eval mode)."""
    x_t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))
    with no_grad():
        z = concat(e_c.forward(x_t), e_r.forward(x_t))
        return g_r.forward(z, mode="eval").data


# -- probes -----------------------------------------------------------------------


def train_probe(
    codes: np.ndarray,
    labels: np.ndarray,
    class_count: int,
    seed: int,
    epochs: int = 80,
    lr: float = 1e-3,
    batch_size: int = 32,
) -> ClassifierHead:
    """Fit a fresh classifier head on raw codes.

    Used only to measure how much class information a representation
    carries; nothing from the measured models is reused.
    """
    codes = np.asarray(codes, dtype=np.float32)
    head = ClassifierHead(codes.shape[1], class_count, derive_rng(seed, "probe-init"))
    opt = Adam(head.parameters(), lr=lr)
    onehots = np.eye(class_count, dtype=np.float32)[labels]
    for epoch in range(epochs):
        rng = derive_rng(seed, "probe-shuffle", epoch)
        for batch in _batches(len(codes), batch_size, rng):
            probs = head.forward(Tensor(codes[batch]), mode="train")
            loss = cross_entropy(probs, onehots[batch])
            opt.zero_grad()
            loss.backward()
            opt.step()
    return head


def probe_accuracy(head: ClassifierHead, codes: np.ndarray, labels: np.ndarray) -> float:
    with no_grad():
        probs = head.forward(Tensor(np.asarray(codes, dtype=np.float32)), mode="eval").data
    return float((probs.argmax(axis=1) == np.asarray(labels)).mean())
