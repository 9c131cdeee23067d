"""Fast built-in sanity checks behind the ``selftest`` CLI verb.

Each check prints one PASS/FAIL line. These are smoke tests for a fresh
install, not the full pytest suite.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from .data import DEFAULT_CLASS_COUNTS, generate_synthetic, kfold_split, load_dataset, save_dataset
from .harness import aggregate_folds
from .models import ArchProfile, build_models
from .seeding import derive_rng
from .tensor import Tensor, cross_entropy, dense, finite_diff_gradient, mse_loss, softmax


def _gradcheck_dense() -> str:
    rng = derive_rng(7, "selftest-dense")
    x = Tensor(rng.standard_normal(5), requires_grad=True, dtype=np.float64)
    w = Tensor(rng.standard_normal((3, 5)), requires_grad=True, dtype=np.float64)
    b = Tensor(rng.standard_normal(3), requires_grad=True, dtype=np.float64)
    target = rng.standard_normal(3)
    loss = mse_loss(dense(x, w, b), Tensor(target, dtype=np.float64))
    loss.backward()
    for t in (x, w, b):
        num = finite_diff_gradient(
            lambda v, t=t: mse_loss(dense(x.detach() if t is not x else v,
                                          w.detach() if t is not w else v,
                                          b.detach() if t is not b else v),
                                    Tensor(target, dtype=np.float64)),
            Tensor(t.data.copy(), dtype=np.float64),
        )
        rel = np.abs(t.grad - num).max() / max(np.abs(num).max(), 1e-8)
        if rel > 1e-4:
            return f"dense gradient off by {rel:.2e}"
    return ""


def _softmax_simplex() -> str:
    rng = derive_rng(7, "selftest-softmax")
    p = softmax(Tensor(rng.standard_normal((8, 4)) * 10)).data
    if abs(p.sum(axis=1) - 1.0).max() > 1e-6 or p.min() <= 0:
        return "softmax rows are not on the simplex"
    return ""


def _losses() -> str:
    zero = mse_loss(Tensor([1.0, 2.0]), Tensor([1.0, 2.0])).item()
    if zero != 0.0:
        return f"mse of identical tensors is {zero}"
    ce = cross_entropy(Tensor([0.25, 0.25, 0.25, 0.25]), np.full(4, 0.25)).item()
    if abs(ce - np.log(4.0)) > 1e-6:
        return f"uniform cross entropy is {ce}, expected ln 4"
    return ""


def _fold_invariants() -> str:
    ds = generate_synthetic(DEFAULT_CLASS_COUNTS, ArchProfile(), seed=11)
    plan = kfold_split(ds, k=3, seed=11)
    all_ids = {s.id for s in ds.samples}
    test_union = set()
    for fold in range(3):
        train, val, test = plan.fold_ids(fold)
        if set(train) & set(val) or set(train) & set(test) or set(val) & set(test):
            return f"fold {fold} splits overlap"
        test_union |= set(test)
    if test_union != all_ids:
        return "test folds do not cover the dataset"
    return ""


def _dataset_roundtrip() -> str:
    ds = generate_synthetic((3, 3, 3, 3), ArchProfile(), seed=5)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "ds.ffds"
        save_dataset(ds, path)
        back = load_dataset(path)
    if len(back) != len(ds):
        return "round trip changed the sample count"
    for a, b in zip(ds.samples, back.samples):
        if a.id != b.id or a.label != b.label or not np.array_equal(a.image, b.image):
            return "round trip changed a sample"
    return ""


def _aggregate_fixture() -> str:
    agg = aggregate_folds([64.8, 69.5, 68.6])
    if abs(agg.mean - 67.63333333) > 1e-6 or abs(agg.sd_population - 2.0368821) > 1e-6:
        return f"aggregate gave mean {agg.mean}, population sd {agg.sd_population}"
    return ""


def _models_deterministic() -> str:
    profile = ArchProfile()
    a = build_models(profile, derive_rng(3, "selftest-models"))
    b = build_models(profile, derive_rng(3, "selftest-models"))
    for (_, na), (_, nb) in zip(a.networks(), b.networks()):
        for (name, arr_a), (_, arr_b) in zip(na.named_arrays(), nb.named_arrays()):
            if not np.array_equal(arr_a, arr_b):
                return f"parameter {name} differs between equally seeded builds"
    return ""


CHECKS = [
    ("dense-gradient-vs-finite-difference", _gradcheck_dense),
    ("softmax-simplex", _softmax_simplex),
    ("loss-fixed-points", _losses),
    ("fold-partition-invariants", _fold_invariants),
    ("dataset-file-roundtrip", _dataset_roundtrip),
    ("fold-aggregation-fixture", _aggregate_fixture),
    ("seeded-build-determinism", _models_deterministic),
]


def run_selftest() -> int:
    failures = 0
    for name, check in CHECKS:
        try:
            problem = check()
        except Exception as exc:  # a crash is a failure, not an abort
            problem = f"{type(exc).__name__}: {exc}"
        if problem:
            failures += 1
            print(f"FAIL {name}: {problem}")
        else:
            print(f"PASS {name}")
    print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return 0 if failures == 0 else 1
