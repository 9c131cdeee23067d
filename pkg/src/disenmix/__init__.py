"""Two-step adversarial factor disentanglement with latent-code mixture
augmentation for small-image classification.

The public surface is the estimator API (:class:`CnnClassifier`,
:class:`MixtureAugmentedClassifier`, :class:`FactorDisentangler`) plus the
lower-level building blocks they are made of: a small autodiff tensor
library, the network definitions, the two-step trainer, the code-mixture
synthesizer, the synthetic benchmark, and the experiment harness behind
the ``disenmix`` CLI.
"""

from .data import (
    AffineRanges,
    Dataset,
    Sample,
    affine_augment,
    generate_synthetic,
    kfold_split,
    load_dataset,
    resize_roi,
    save_dataset,
)
from .errors import (
    ConfigError,
    DataError,
    DisenmixError,
    FormatError,
    NumericError,
    ShapeError,
    ValidationError,
    VersionError,
)
from .estimators import CnnClassifier, FactorDisentangler, MixtureAugmentedClassifier
from .harness import (
    ConfusionMatrix,
    RunConfig,
    aggregate_folds,
    emit_report,
    evaluate,
    load_checkpoint,
    run_experiment,
    save_checkpoint,
)
from .mixture import (
    CodeBank,
    MixtureSpec,
    SoftTarget,
    build_code_bank,
    mix_codes,
    mixture_target,
    nearest_cross_class_codes,
    sample_proportions,
    swap_codes,
    synthesize_mixture_sample,
)
from .models import (
    ArchProfile,
    ClassifierHead,
    Decoder,
    Encoder,
    LatentCode,
    ModelBundle,
    build_models,
    classify,
    decode,
    encode,
)
from .seeding import derive_rng
from .tensor import Adam, LossBreakdown, Tensor, finite_diff_gradient, no_grad
from .training import TrainConfig, TrainLog, combine_losses, reconstruct, train_step1, train_step2

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AffineRanges",
    "ArchProfile",
    "ClassifierHead",
    "CnnClassifier",
    "CodeBank",
    "ConfigError",
    "ConfusionMatrix",
    "DataError",
    "Dataset",
    "Decoder",
    "DisenmixError",
    "Encoder",
    "FactorDisentangler",
    "FormatError",
    "LatentCode",
    "LossBreakdown",
    "MixtureAugmentedClassifier",
    "MixtureSpec",
    "ModelBundle",
    "NumericError",
    "RunConfig",
    "Sample",
    "ShapeError",
    "SoftTarget",
    "Tensor",
    "TrainConfig",
    "TrainLog",
    "ValidationError",
    "VersionError",
    "affine_augment",
    "aggregate_folds",
    "build_code_bank",
    "build_models",
    "classify",
    "combine_losses",
    "decode",
    "derive_rng",
    "emit_report",
    "encode",
    "evaluate",
    "finite_diff_gradient",
    "generate_synthetic",
    "kfold_split",
    "load_checkpoint",
    "load_dataset",
    "mix_codes",
    "mixture_target",
    "nearest_cross_class_codes",
    "no_grad",
    "reconstruct",
    "resize_roi",
    "run_experiment",
    "sample_proportions",
    "save_checkpoint",
    "save_dataset",
    "swap_codes",
    "synthesize_mixture_sample",
    "train_step1",
    "train_step2",
]
