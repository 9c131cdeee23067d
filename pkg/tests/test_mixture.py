import numpy as np
import pytest

from _oracles import mix_codes_loops, nearest_scan
from disenmix.data import generate_synthetic
from disenmix.errors import DataError, ValidationError
from disenmix.mixture import (
    CodeBank,
    SoftTarget,
    build_code_bank,
    mix_codes,
    mixture_target,
    nearest_cross_class_codes,
    plan_mixture,
    sample_proportions,
    swap_codes,
    synthesize_batch,
    synthesize_mixture_sample,
)
from disenmix.models import ArchProfile, build_models, encode
from disenmix.seeding import derive_rng
from disenmix.training import reconstruct


@pytest.fixture(scope="module")
def untrained(desk_profile):
    """Mixture mechanics are exercised on untrained networks; identities and
    determinism do not depend on training."""
    return build_models(desk_profile, derive_rng(21, "mix-models"))


class TestCodeBank:
    def test_standard_counts(self, benchmark_dataset, untrained):
        bank = build_code_bank(benchmark_dataset, untrained.e_c)
        assert [bank.size(c) for c in range(4)] == [66, 81, 65, 27]

    def test_single_sample_dataset(self, untrained):
        ds = generate_synthetic((1, 1, 1, 1), ArchProfile(), seed=2)
        solo = ds.subset([ds.samples[0].id])
        solo.class_names = ("cyst",)
        solo.samples[0].target = np.array([1.0], np.float32)
        bank = build_code_bank(solo, untrained.e_c)
        assert bank.size(0) == 1 and sum(bank.size(c) for c in bank.classes()) == 1

    def test_bank_codes_equal_direct_encode(self, untrained):
        ds = generate_synthetic((3, 3, 3, 3), ArchProfile(), seed=3)
        bank = build_code_bank(ds, untrained.e_c)
        by_id = {s.id: s for s in ds.samples}
        for label, rows in bank.entries.items():
            for sid, code in rows:
                expected = encode(untrained.e_c, by_id[sid].image).data
                np.testing.assert_allclose(code, expected, atol=1e-5)

    def test_empty_class_rejected(self, untrained):
        ds = generate_synthetic((2, 2, 2, 2), ArchProfile(), seed=4)
        no_healthy = ds.subset([s.id for s in ds.samples if s.label != 3])
        with pytest.raises(DataError, match="healthy"):
            build_code_bank(no_healthy, untrained.e_c)


class TestSwapCodes:
    def test_self_swap_equals_reconstruction(self, benchmark_dataset, untrained):
        x = benchmark_dataset.samples[0].image
        swapped = swap_codes(x, x, untrained.e_c, untrained.e_r, untrained.g_r)
        plain = reconstruct(untrained.e_c, untrained.e_r, untrained.g_r, x)
        np.testing.assert_array_equal(swapped, plain)

    def test_output_shape(self, benchmark_dataset, untrained):
        x = benchmark_dataset.samples[0].image
        y = benchmark_dataset.samples[100].image
        assert swap_codes(x, y, untrained.e_c, untrained.e_r, untrained.g_r).shape == x.shape


class TestNearestCrossClass:
    def test_single_entry_per_class(self):
        rng = derive_rng(0, "nn")
        entries = {c: [(c * 10, rng.standard_normal(8).astype(np.float32))] for c in range(4)}
        bank = CodeBank(entries, 8)
        got = nearest_cross_class_codes(np.zeros(8, np.float32), 1, bank)
        assert [cls for cls, _ in got] == [0, 2, 3]
        for cls, code in got:
            np.testing.assert_array_equal(code, entries[cls][0][1])

    def test_exact_match_selected_at_distance_zero(self):
        rng = derive_rng(1, "nn")
        target = rng.standard_normal(8).astype(np.float32)
        entries = {
            0: [(0, rng.standard_normal(8).astype(np.float32)), (1, target.copy())],
            1: [(2, rng.standard_normal(8).astype(np.float32))],
        }
        bank = CodeBank(entries, 8)
        got = nearest_cross_class_codes(target, 1, bank)
        np.testing.assert_array_equal(got[0][1], target)

    @pytest.mark.parametrize("trial", range(10))
    def test_matches_exhaustive_scan(self, trial):
        rng = derive_rng(trial, "nn-oracle")
        entries = {
            c: [(int(i + 100 * c), rng.standard_normal(16).astype(np.float32)) for i in range(50)]
            for c in range(4)
        }
        bank = CodeBank(entries, 16)
        c = rng.standard_normal(16).astype(np.float32)
        got = nearest_cross_class_codes(c, 2, bank)
        expected = nearest_scan(c, 2, entries)
        assert len(got) == len(expected)
        for (gc, gcode), (ec, _, ecode) in zip(got, expected):
            assert gc == ec
            np.testing.assert_array_equal(gcode, ecode)

    def test_tie_breaks_to_lowest_sample_id(self):
        code = np.ones(4, np.float32)
        entries = {
            0: [(5, code.copy()), (2, code.copy()), (9, code.copy())],
            1: [(1, np.zeros(4, np.float32))],
        }
        entries[0].sort(key=lambda r: r[0])  # banks are id-sorted by construction
        bank = CodeBank(entries, 4)
        got = nearest_scan(code, 1, entries)
        assert got[0][1] == 2
        ours = nearest_cross_class_codes(code, 1, bank)
        np.testing.assert_array_equal(ours[0][1], code)

    def test_missing_class_rejected(self):
        bank = CodeBank({0: [(0, np.zeros(4, np.float32))], 1: []}, 4)
        with pytest.raises(DataError):
            nearest_cross_class_codes(np.zeros(4, np.float32), 0, bank)


class TestSampleProportions:
    def test_single_component(self):
        np.testing.assert_array_equal(sample_proportions(1, derive_rng(0, "p")), [1.0])

    def test_large_alpha_concentrates_on_uniform(self):
        for trial in range(10):
            props = sample_proportions(4, derive_rng(trial, "p-large"), alpha=1e6)
            assert np.abs(props - 0.25).max() < 0.01

    def test_moment_check_at_alpha_one(self):
        rng = derive_rng(3, "p-mc")
        draws = np.stack([sample_proportions(4, rng, alpha=1.0) for _ in range(10_000)])
        assert np.abs(draws.mean(axis=0) - 0.25).max() < 0.02

    def test_simplex_within_tolerance(self):
        for trial in range(50):
            props = sample_proportions(5, derive_rng(trial, "p-sum"), alpha=0.7)
            assert props.min() >= 0
            assert abs(props.sum() - 1.0) < 1e-9

    def test_bad_arguments(self):
        with pytest.raises(ValidationError):
            sample_proportions(0, derive_rng(0, "p"))
        with pytest.raises(ValidationError):
            sample_proportions(3, derive_rng(0, "p"), alpha=0.0)


class TestMixCodes:
    def test_degenerate_mixture_is_exact(self):
        rng = derive_rng(0, "mix")
        codes = [rng.standard_normal(8).astype(np.float32) for _ in range(4)]
        mixed = mix_codes([(codes[0], 1.0), (codes[1], 0.0), (codes[2], 0.0), (codes[3], 0.0)])
        np.testing.assert_array_equal(mixed, codes[0])

    def test_equal_codes_average_to_themselves(self):
        code = derive_rng(1, "mix").standard_normal(8).astype(np.float32)
        mixed = mix_codes([(code, 0.5), (code.copy(), 0.5)])
        np.testing.assert_allclose(mixed, code, atol=1e-7)

    @pytest.mark.parametrize("trial", range(10))
    def test_matches_loop_oracle(self, trial):
        rng = derive_rng(trial, "mix-oracle")
        props = rng.dirichlet(np.ones(4))
        comps = [(rng.standard_normal(8), p) for p in props]
        got = mix_codes(comps)
        assert np.abs(got - mix_codes_loops(comps)).max() < 1e-6

    def test_matches_loop_oracle_at_64bit(self):
        rng = derive_rng(42, "mix-oracle64")
        props = rng.dirichlet(np.ones(3))
        comps = [(rng.standard_normal(8), p) for p in props]
        got = mix_codes([(c.astype(np.float64), p) for c, p in comps])
        assert np.abs(got.astype(np.float64) - mix_codes_loops(comps)).max() < 1e-6

    def test_off_simplex_rejected(self):
        code = np.ones(4, np.float32)
        with pytest.raises(ValidationError):
            mix_codes([(code, 0.7), (code, 0.7)])


class TestMixtureTarget:
    def test_single_class_one_hot(self):
        t = mixture_target([0], np.array([1.0]), 4)
        np.testing.assert_array_equal(t.probs, [1.0, 0.0, 0.0, 0.0])

    def test_proportions_placed_by_class(self):
        t = mixture_target([0, 1, 2], np.array([0.6, 0.3, 0.1]), 4)
        np.testing.assert_allclose(t.probs, [0.6, 0.3, 0.1, 0.0], atol=1e-7)

    def test_sums_to_one(self):
        for trial in range(20):
            props = sample_proportions(4, derive_rng(trial, "mt"), alpha=0.5)
            t = mixture_target([2, 0, 3, 1], props, 4)
            assert abs(float(t.probs.sum()) - 1.0) < 1e-6

    def test_duplicate_class_rejected(self):
        with pytest.raises(ValidationError):
            mixture_target([1, 1], np.array([0.5, 0.5]), 4)


class TestSynthesize:
    def test_degenerate_proportions_reproduce_reconstruction(self, benchmark_split, untrained):
        train, _, _ = benchmark_split
        bank = build_code_bank(train, untrained.e_c)
        forced = np.array([1.0, 0.0, 0.0, 0.0])
        for sample in train.samples[:5]:
            img, target = synthesize_mixture_sample(
                sample, bank, untrained.e_c, untrained.e_r, untrained.g_r,
                derive_rng(0, "syn", sample.id), proportions=forced,
            )
            plain = reconstruct(untrained.e_c, untrained.e_r, untrained.g_r, sample.image)
            np.testing.assert_array_equal(img, plain)
            np.testing.assert_array_equal(target.probs, sample.target)

    def test_output_shape_and_range(self, benchmark_split, untrained):
        train, _, _ = benchmark_split
        bank = build_code_bank(train, untrained.e_c)
        sample = train.samples[0]
        img, target = synthesize_mixture_sample(
            sample, bank, untrained.e_c, untrained.e_r, untrained.g_r, derive_rng(1, "syn")
        )
        assert img.shape == sample.image.shape
        assert img.min() > 0.0 and img.max() < 1.0
        assert isinstance(target, SoftTarget)

    def test_target_means_match_dirichlet_expectation(self, benchmark_split, untrained):
        train, _, _ = benchmark_split
        bank = build_code_bank(train, untrained.e_c)
        sample = train.samples[0]
        masses = np.zeros(4)
        n = 1000
        for i in range(n):
            spec = plan_mixture(sample, bank, untrained.e_c, derive_rng(7, "syn-mc", i), alpha=1.0)
            t = mixture_target([c for c, _, _ in spec.components], [p for _, _, p in spec.components], 4)
            masses += t.probs
        np.testing.assert_allclose(masses / n, np.full(4, 0.25), atol=0.03)

    def test_batch_is_deterministic(self, benchmark_split, untrained):
        train, _, _ = benchmark_split
        bank = build_code_bank(train, untrained.e_c)
        subset = train.samples[:8]
        a_img, a_tgt = synthesize_batch(subset, bank, untrained.e_c, untrained.e_r, untrained.g_r, seed=5, epoch=2)
        b_img, b_tgt = synthesize_batch(subset, bank, untrained.e_c, untrained.e_r, untrained.g_r, seed=5, epoch=2)
        np.testing.assert_array_equal(a_img, b_img)
        np.testing.assert_array_equal(a_tgt, b_tgt)

    def test_no_fold_leakage(self, benchmark_split, untrained):
        train, val, test = benchmark_split
        bank = build_code_bank(train, untrained.e_c)
        train_ids = {s.id for s in train.samples}
        assert bank.sample_ids() <= train_ids
        assert not bank.sample_ids() & {s.id for s in val.samples}
        assert not bank.sample_ids() & {s.id for s in test.samples}


class TestSwapVotesWithTrainedModels:
    def test_swapped_images_carry_target_class(self, trained_benchmark):
        """The step-1 classifier should vote for the code donor's class more
        often than for the unspecified-source's class on swapped images."""
        bundle = trained_benchmark["bundle"]
        train = trained_benchmark["train"]
        rng = derive_rng(13, "swap-vote")
        by_class = train.by_class()
        votes_target = 0
        votes_source = 0
        pairs = 0
        from disenmix.training import forward_probs

        while pairs < 120:
            cls_x, cls_y = rng.choice(4, size=2, replace=False)
            x = by_class[cls_x][int(rng.integers(len(by_class[cls_x])))]
            y = by_class[cls_y][int(rng.integers(len(by_class[cls_y])))]
            swapped = swap_codes(x.image, y.image, bundle.e_c, bundle.e_r, bundle.g_r)
            probs = forward_probs(bundle.e_c, bundle.classifier, swapped[None])
            pred = int(probs.argmax(axis=1)[0])
            votes_target += pred == cls_y
            votes_source += pred == cls_x
            pairs += 1
        assert votes_target > votes_source
