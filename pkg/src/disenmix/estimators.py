"""scikit-learn style wrappers around the training pipelines.

These make the pipelines compose with the wider ecosystem: ``get_params``
and ``clone`` work, ``fit``/``predict``/``transform`` follow the usual
conventions, and inputs are validated and coerced by
:mod:`disenmix.validation`. Images may be passed flat (N, side*side) so
the estimators slot into tools that expect 2-D feature matrices.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .data import AffineRanges, Dataset, Sample, one_hot
from .mixture import build_code_bank, swap_codes, synthesize_batch
from .models import ArchProfile, build_models
from .seeding import derive_rng
from .training import forward_probs, reconstruct, train_step1, train_step2
from .validation import as_image_batch, encode_labels, stratified_holdout


def _to_dataset(images: np.ndarray, labels: np.ndarray, class_count: int) -> Dataset:
    samples = [
        Sample(img, int(lab), one_hot(int(lab), class_count), i)
        for i, (img, lab) in enumerate(zip(images, labels))
    ]
    names = tuple(f"class{i}" for i in range(class_count))
    return Dataset(samples, names, images.shape[-1])


class _ImageEstimator(BaseEstimator):
    """Shared fit plumbing: coercion, label encoding, train/val split."""

    def _prepare(self, X, y):
        images = as_image_batch(X, self.image_size)
        classes, encoded = encode_labels(y)
        if len(images) != len(encoded):
            raise ValueError(f"X has {len(images)} rows but y has {len(encoded)}")
        profile = ArchProfile(
            image_size=self.image_size,
            channels=tuple(self.channels),
            code_dim=self.code_dim,
            decoder_seed_hw=self.decoder_seed_hw,
            class_count=len(classes),
        )
        rng = derive_rng(self.random_state, "holdout")
        fit_idx, hold_idx = stratified_holdout(encoded, self.val_fraction, rng)
        dataset = _to_dataset(images, encoded, len(classes))
        return classes, profile, dataset.subset(fit_idx), dataset.subset(hold_idx)

    def _predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "bundle_")
        images = as_image_batch(X, self.image_size)
        return forward_probs(self.bundle_.e_c, self.bundle_.classifier, images)


class CnnClassifier(ClassifierMixin, _ImageEstimator):
    """Plain supervised baseline: conv encoder plus softmax head."""

    def __init__(
        self,
        image_size=32,
        channels=(16, 32, 64),
        code_dim=32,
        decoder_seed_hw=4,
        epochs=20,
        batch_size=32,
        lr=1e-3,
        val_fraction=0.2,
        views_per_sample=1,
        augment=False,
        patience=0,
        random_state=0,
    ):
        self.image_size = image_size
        self.channels = channels
        self.code_dim = code_dim
        self.decoder_seed_hw = decoder_seed_hw
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.val_fraction = val_fraction
        self.views_per_sample = views_per_sample
        self.augment = augment
        self.patience = patience
        self.random_state = random_state

    def _train_config(self):
        from .training import TrainConfig

        return TrainConfig(
            epochs_step1=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            seed=int(self.random_state),
            early_stop_patience=self.patience,
        )

    def fit(self, X, y):
        classes, profile, train, val = self._prepare(X, y)
        self.classes_ = classes
        self.profile_ = profile
        self.bundle_ = build_models(profile, derive_rng(self.random_state, "init"))
        affine = AffineRanges() if self.augment else None
        self.log_ = train_step1(
            train, val, self.bundle_.e_c, self.bundle_.classifier, self._train_config(),
            views_per_sample=self.views_per_sample, affine=affine,
        )
        return self

    def predict_proba(self, X) -> np.ndarray:
        return self._predict_proba(X)

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.predict_proba(X).argmax(axis=1)]


class MixtureAugmentedClassifier(ClassifierMixin, _ImageEstimator):
    """Full pipeline: disentangle, then retrain on real plus code mixtures.

    ``fit`` first trains the specified encoder against a classifier, then
    the unspecified encoder and decoder adversarially, and finally a fresh
    classifier on the real data joined by per-epoch mixture samples with
    soft targets.
    """

    def __init__(
        self,
        image_size=32,
        channels=(16, 32, 64),
        code_dim=32,
        decoder_seed_hw=4,
        epochs=20,
        epochs_step2=25,
        batch_size=32,
        lr=1e-3,
        lambda_=-0.1,
        alpha=1.0,
        synth_per_real=1,
        neighbor_top_k=1,
        val_fraction=0.2,
        views_per_sample=1,
        augment=False,
        patience=0,
        random_state=0,
    ):
        self.image_size = image_size
        self.channels = channels
        self.code_dim = code_dim
        self.decoder_seed_hw = decoder_seed_hw
        self.epochs = epochs
        self.epochs_step2 = epochs_step2
        self.batch_size = batch_size
        self.lr = lr
        self.lambda_ = lambda_
        self.alpha = alpha
        self.synth_per_real = synth_per_real
        self.neighbor_top_k = neighbor_top_k
        self.val_fraction = val_fraction
        self.views_per_sample = views_per_sample
        self.augment = augment
        self.patience = patience
        self.random_state = random_state

    def _train_config(self, seed_key: str):
        from .training import TrainConfig

        return TrainConfig(
            lambda_=self.lambda_,
            epochs_step1=self.epochs,
            epochs_step2=self.epochs_step2,
            batch_size=self.batch_size,
            lr=self.lr,
            seed=int(derive_rng(self.random_state, seed_key).integers(0, 2**63 - 1)),
            early_stop_patience=self.patience,
        )

    def fit(self, X, y):
        classes, profile, train, val = self._prepare(X, y)
        self.classes_ = classes
        self.profile_ = profile
        affine = AffineRanges() if self.augment else None

        disen = build_models(profile, derive_rng(self.random_state, "disentangle-init"))
        dcfg = self._train_config("disentangle")
        train_step1(train, val, disen.e_c, disen.classifier, dcfg,
                    views_per_sample=self.views_per_sample, affine=affine)
        train_step2(train, val, disen.e_c, disen.e_r, disen.g_r, disen.adv_classifier, dcfg)
        self.disentangled_ = disen
        self.code_bank_ = build_code_bank(train, disen.e_c)

        synth_seed = int(derive_rng(self.random_state, "mixture").integers(0, 2**63 - 1))

        def extra(epoch: int):
            return synthesize_batch(
                train.samples, self.code_bank_, disen.e_c, disen.e_r, disen.g_r,
                seed=synth_seed, epoch=epoch, alpha=self.alpha,
                per_sample=self.synth_per_real, top_k=self.neighbor_top_k,
            )

        self.bundle_ = build_models(profile, derive_rng(self.random_state, "init"))
        self.log_ = train_step1(
            train, val, self.bundle_.e_c, self.bundle_.classifier, self._train_config("classifier"),
            views_per_sample=self.views_per_sample, affine=affine,
            extra_per_epoch=extra if self.synth_per_real > 0 else None,
        )
        return self

    def predict_proba(self, X) -> np.ndarray:
        return self._predict_proba(X)

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.predict_proba(X).argmax(axis=1)]


class FactorDisentangler(TransformerMixin, _ImageEstimator):
    """Fit the two-step disentanglement; transform images into codes.

    ``transform`` returns the concatenated (specified, unspecified) codes,
    one row per image. The two halves are also available separately, and
    images can be reconstructed or have their class appearance swapped.
    """

    def __init__(
        self,
        image_size=32,
        channels=(16, 32, 64),
        code_dim=32,
        decoder_seed_hw=4,
        epochs=20,
        epochs_step2=25,
        batch_size=32,
        lr=1e-3,
        lambda_=-0.1,
        val_fraction=0.2,
        patience=0,
        random_state=0,
    ):
        self.image_size = image_size
        self.channels = channels
        self.code_dim = code_dim
        self.decoder_seed_hw = decoder_seed_hw
        self.epochs = epochs
        self.epochs_step2 = epochs_step2
        self.batch_size = batch_size
        self.lr = lr
        self.lambda_ = lambda_
        self.val_fraction = val_fraction
        self.patience = patience
        self.random_state = random_state

    def fit(self, X, y):
        from .training import TrainConfig

        classes, profile, train, val = self._prepare(X, y)
        self.classes_ = classes
        self.profile_ = profile
        cfg = TrainConfig(
            lambda_=self.lambda_,
            epochs_step1=self.epochs,
            epochs_step2=self.epochs_step2,
            batch_size=self.batch_size,
            lr=self.lr,
            seed=int(self.random_state),
            early_stop_patience=self.patience,
        )
        self.bundle_ = build_models(profile, derive_rng(self.random_state, "init"))
        self.step1_log_ = train_step1(train, val, self.bundle_.e_c, self.bundle_.classifier, cfg)
        self.step2_log_ = train_step2(
            train, val, self.bundle_.e_c, self.bundle_.e_r, self.bundle_.g_r,
            self.bundle_.adv_classifier, cfg,
        )
        return self

    def _encode(self, X, encoder) -> np.ndarray:
        check_is_fitted(self, "bundle_")
        from .models import encode

        images = as_image_batch(X, self.image_size)
        return encode(encoder, images).data

    def specified_codes(self, X) -> np.ndarray:
        return self._encode(X, self.bundle_.e_c)

    def unspecified_codes(self, X) -> np.ndarray:
        return self._encode(X, self.bundle_.e_r)

    def transform(self, X) -> np.ndarray:
        return np.hstack([self.specified_codes(X), self.unspecified_codes(X)])

    def reconstruct(self, X) -> np.ndarray:
        check_is_fitted(self, "bundle_")
        images = as_image_batch(X, self.image_size)
        return reconstruct(self.bundle_.e_c, self.bundle_.e_r, self.bundle_.g_r, images)

    def swap(self, X, Y) -> np.ndarray:
        """Images carrying X's unspecified codes and Y's class appearance."""
        check_is_fitted(self, "bundle_")
        xs = as_image_batch(X, self.image_size)
        ys = as_image_batch(Y, self.image_size)
        if len(xs) != len(ys):
            raise ValueError(f"X and Y must pair up, got {len(xs)} and {len(ys)}")
        return swap_codes(xs, ys, self.bundle_.e_c, self.bundle_.e_r, self.bundle_.g_r)
