import numpy as np
import pytest

from disenmix.data import AffineRanges, generate_synthetic, kfold_split
from disenmix.models import ArchProfile, build_models
from disenmix.seeding import derive_rng
from disenmix.training import TrainConfig, train_step1, train_step2

# The pinned seed behind every "default benchmark" check in this suite.
BENCHMARK_SEED = 0


@pytest.fixture(scope="session")
def desk_profile():
    return ArchProfile()


@pytest.fixture(scope="session")
def benchmark_dataset(desk_profile):
    """239-sample synthetic benchmark with the standard class counts."""
    return generate_synthetic(profile=desk_profile, seed=BENCHMARK_SEED)


@pytest.fixture(scope="session")
def benchmark_split(benchmark_dataset):
    plan = kfold_split(benchmark_dataset, k=3, seed=BENCHMARK_SEED)
    train_ids, val_ids, test_ids = plan.fold_ids(0)
    return (
        benchmark_dataset.subset(train_ids),
        benchmark_dataset.subset(val_ids),
        benchmark_dataset.subset(test_ids),
    )


@pytest.fixture(scope="session")
def trained_benchmark(desk_profile, benchmark_split):
    """Both training steps run on fold 0 of the default benchmark.

    Slow (about a minute), so it is shared across every test that needs
    trained encoders/decoder.
    """
    train, val, test = benchmark_split
    bundle = build_models(desk_profile, derive_rng(BENCHMARK_SEED, "bench-init"))
    cfg = TrainConfig(
        seed=int(derive_rng(BENCHMARK_SEED, "bench-train").integers(0, 2**62)),
        epochs_step1=14,
        epochs_step2=25,
        batch_size=32,
        lr=1e-3,
    )
    log1 = train_step1(
        train, val, bundle.e_c, bundle.classifier, cfg,
        views_per_sample=10, affine=AffineRanges(),
    )
    log2 = train_step2(train, val, bundle.e_c, bundle.e_r, bundle.g_r, bundle.adv_classifier, cfg)
    return {
        "bundle": bundle,
        "cfg": cfg,
        "train": train,
        "val": val,
        "test": test,
        "log1": log1,
        "log2": log2,
    }


def assert_allclose(actual, expected, tol, what=""):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    worst = np.abs(actual - expected).max() if actual.size else 0.0
    assert worst <= tol, f"{what}: max abs difference {worst} exceeds {tol}"
