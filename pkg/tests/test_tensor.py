import numpy as np
import pytest

from _gradcheck import REL_TOL, check_op_gradients, op_cases, relative_error, run_gradient_suite
from _oracles import (
    adam_first_step,
    conv2d_loops,
    cross_entropy_direct,
    dense_loops,
    mse_sum_loops,
    softmax_direct,
    upsample2x_loops,
)
from disenmix.errors import ShapeError, ValidationError
from disenmix.seeding import derive_rng
from disenmix.tensor import (
    Adam,
    BatchNormState,
    Tensor,
    batchnorm,
    concat,
    conv2d,
    cross_entropy,
    dense,
    dropout,
    finite_diff_gradient,
    graph_record,
    mse_loss,
    relu,
    sigmoid,
    softmax,
    tsum,
    upsample2x,
)


class TestConv2d:
    def test_stride2_halves_resolution(self):
        rng = derive_rng(0, "conv-shape")
        x = Tensor(rng.standard_normal((1, 128, 128)).astype(np.float32))
        k = Tensor(rng.standard_normal((64, 1, 3, 3)).astype(np.float32) * 0.01)
        out = conv2d(x, k, Tensor(np.zeros(64, np.float32)), stride=2)
        assert out.shape == (64, 64, 64)

    def test_identity_kernel(self):
        rng = derive_rng(1, "conv-id")
        x = rng.standard_normal((1, 6, 6)).astype(np.float32)
        kernel = np.ones((1, 1, 1, 1), np.float32)
        out = conv2d(Tensor(x), Tensor(kernel), Tensor(np.zeros(1, np.float32)), stride=1)
        np.testing.assert_array_equal(out.data, x)

    @pytest.mark.parametrize("stride", [1, 2])
    @pytest.mark.parametrize("trial", range(5))
    def test_matches_loop_oracle(self, stride, trial):
        # kernel scaled so float32 rounding stays well under the tolerance
        rng = derive_rng(trial, "conv-oracle", stride)
        x = rng.standard_normal((2, 5, 5)).astype(np.float32)
        k = (rng.standard_normal((3, 2, 3, 3)) * 0.25).astype(np.float32)
        b = rng.standard_normal(3).astype(np.float32)
        out = conv2d(Tensor(x), Tensor(k), Tensor(b), stride=stride)
        expected = conv2d_loops(x, k, b, stride)
        assert out.data.shape == expected.shape
        assert np.abs(out.data - expected).max() < 1e-6

    @pytest.mark.parametrize("stride", [1, 2])
    def test_matches_loop_oracle_at_64bit(self, stride):
        rng = derive_rng(11, "conv-oracle64", stride)
        x = rng.standard_normal((3, 6, 7))
        k = rng.standard_normal((2, 3, 3, 3))
        b = rng.standard_normal(2)
        out = conv2d(Tensor(x, dtype=np.float64), Tensor(k, dtype=np.float64), Tensor(b, dtype=np.float64), stride=stride)
        assert np.abs(out.data - conv2d_loops(x, k, b, stride)).max() < 1e-12

    def test_batched_agrees_with_per_sample(self):
        rng = derive_rng(2, "conv-batch")
        x = rng.standard_normal((4, 2, 6, 6)).astype(np.float32)
        k = rng.standard_normal((3, 2, 3, 3)).astype(np.float32)
        b = rng.standard_normal(3).astype(np.float32)
        batched = conv2d(Tensor(x), Tensor(k), Tensor(b), stride=2).data
        for i in range(4):
            single = conv2d(Tensor(x[i]), Tensor(k), Tensor(b), stride=2).data
            np.testing.assert_array_equal(batched[i], single)

    def test_channel_mismatch_names_both_shapes(self):
        x = Tensor(np.zeros((2, 5, 5), np.float32))
        k = Tensor(np.zeros((3, 4, 3, 3), np.float32))
        with pytest.raises(ShapeError, match=r"\(2, 5, 5\).*\(3, 4, 3, 3\)"):
            conv2d(x, k, Tensor(np.zeros(3, np.float32)), stride=1)

    def test_even_kernel_rejected(self):
        x = Tensor(np.zeros((1, 5, 5), np.float32))
        with pytest.raises(ValidationError):
            conv2d(x, Tensor(np.zeros((1, 1, 2, 2), np.float32)), Tensor(np.zeros(1, np.float32)))

    def test_input_smaller_than_kernel_rejected(self):
        x = Tensor(np.zeros((1, 2, 2), np.float32))
        with pytest.raises(ShapeError):
            conv2d(x, Tensor(np.zeros((1, 1, 3, 3), np.float32)), Tensor(np.zeros(1, np.float32)))


class TestDense:
    def test_identity(self):
        x = np.array([1.0, -2.0, 3.0], np.float32)
        out = dense(Tensor(x), Tensor(np.eye(3, dtype=np.float32)), Tensor(np.zeros(3, np.float32)))
        np.testing.assert_array_equal(out.data, x)

    @pytest.mark.parametrize("trial", range(10))
    def test_matches_loop_oracle(self, trial):
        rng = derive_rng(trial, "dense-oracle")
        x = rng.standard_normal(4).astype(np.float32)
        w = rng.standard_normal((3, 4)).astype(np.float32)
        b = rng.standard_normal(3).astype(np.float32)
        out = dense(Tensor(x), Tensor(w), Tensor(b)).data
        assert np.abs(out - dense_loops(x, w, b)).max() < 1e-6

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            dense(Tensor(np.zeros(5, np.float32)), Tensor(np.zeros((3, 4), np.float32)), Tensor(np.zeros(3, np.float32)))


class TestActivations:
    def test_relu_values(self):
        out = relu(Tensor([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])

    def test_sigmoid_at_zero(self):
        assert sigmoid(Tensor([0.0])).data[0] == 0.5

    def test_sigmoid_extreme_inputs_finite(self):
        out = sigmoid(Tensor([-1000.0, 1000.0])).data
        assert np.all(np.isfinite(out))
        assert 0.0 <= out[0] < 1e-6 and 1.0 - 1e-6 < out[1] <= 1.0

    @pytest.mark.parametrize("trial", range(5))
    def test_sigmoid_gradient_matches_finite_differences(self, trial):
        rng = derive_rng(trial, "sigmoid-grad")
        x = rng.standard_normal(6) * 2
        leaf = Tensor(x, requires_grad=True, dtype=np.float64)
        tsum(sigmoid(leaf)).backward()
        numeric = finite_diff_gradient(lambda t: tsum(sigmoid(t)), Tensor(x, dtype=np.float64))
        assert relative_error(leaf.grad, numeric) < 1e-6


class TestSoftmax:
    def test_uniform_input(self):
        out = softmax(Tensor([3.0, 3.0, 3.0, 3.0])).data
        np.testing.assert_allclose(out, [0.25, 0.25, 0.25, 0.25], atol=1e-7)

    def test_large_logits_stable(self):
        out = softmax(Tensor([1000.0, 0.0])).data
        assert np.all(np.isfinite(out))
        assert out[0] > 1 - 1e-6 and out[1] < 1e-6

    @pytest.mark.parametrize("trial", range(10))
    def test_matches_direct_formula(self, trial):
        rng = derive_rng(trial, "softmax-oracle")
        x = rng.standard_normal(4)
        out = softmax(Tensor(x, dtype=np.float64)).data
        assert np.abs(out - softmax_direct(x)).max() < 1e-12

    @pytest.mark.parametrize("trial", range(20))
    def test_simplex_invariant(self, trial):
        rng = derive_rng(trial, "softmax-simplex")
        out = softmax(Tensor(rng.standard_normal((3, 7)) * 5)).data
        assert np.all(out > 0)
        assert np.abs(out.sum(axis=-1) - 1.0).max() < 1e-6


class TestBatchNorm:
    def test_eval_identity_with_unit_state(self):
        # identity up to the epsilon inside 1/sqrt(var + eps)
        x = derive_rng(0, "bn-eval").standard_normal((4, 3)).astype(np.float32)
        state = BatchNormState(3)
        out = batchnorm(Tensor(x), Tensor(np.ones(3, np.float32)), Tensor(np.zeros(3, np.float32)), state, mode="eval")
        np.testing.assert_allclose(out.data, x, atol=5e-5)

    def test_constant_batch_returns_shift(self):
        x = np.full((5, 3), 2.5, np.float32)
        shift = np.array([1.0, -1.0, 0.5], np.float32)
        state = BatchNormState(3)
        out = batchnorm(Tensor(x), Tensor(np.ones(3, np.float32)), Tensor(shift), state, mode="train")
        np.testing.assert_allclose(out.data, np.tile(shift, (5, 1)), atol=1e-5)

    def test_normalizes_random_batch(self):
        x = derive_rng(1, "bn-train").standard_normal((64, 5)) * 3 + 2
        state = BatchNormState(5, dtype=np.float64)
        out = batchnorm(
            Tensor(x, dtype=np.float64),
            Tensor(np.ones(5), dtype=np.float64),
            Tensor(np.zeros(5), dtype=np.float64),
            state,
            mode="train",
        ).data
        assert np.abs(out.mean(axis=0)).max() < 1e-6
        assert np.abs(out.var(axis=0) - 1.0).max() < 1e-4

    def test_single_sample_train_batch_rejected(self):
        state = BatchNormState(3)
        with pytest.raises(ValidationError):
            batchnorm(
                Tensor(np.zeros((1, 3), np.float32)),
                Tensor(np.ones(3, np.float32)),
                Tensor(np.zeros(3, np.float32)),
                state,
                mode="train",
            )


class TestDropout:
    def test_rate_zero_identity(self):
        x = Tensor(np.arange(6, dtype=np.float32))
        for mode in ("train", "eval"):
            out = dropout(x, 0.0, rng=derive_rng(0, "d"), mode=mode)
            np.testing.assert_array_equal(out.data, x.data)

    def test_eval_identity(self):
        x = Tensor(np.arange(6, dtype=np.float32))
        out = dropout(x, 0.5, mode="eval")
        np.testing.assert_array_equal(out.data, x.data)

    def test_drop_fraction_and_mean(self):
        rng_data = derive_rng(0, "dropout-data")
        x = rng_data.uniform(0.5, 1.5, 100_000).astype(np.float32)
        out = dropout(Tensor(x), 0.5, rng=derive_rng(7, "dropout-mask"), mode="train").data
        dropped = float((out == 0).mean())
        assert abs(dropped - 0.5) < 0.01
        assert abs(out.mean() - x.mean()) / x.mean() < 0.02

    def test_seeded_mask_is_reproducible(self):
        x = Tensor(np.ones(1000, np.float32))
        a = dropout(x, 0.3, rng=derive_rng(3, "mask"), mode="train").data
        b = dropout(x, 0.3, rng=derive_rng(3, "mask"), mode="train").data
        np.testing.assert_array_equal(a, b)


class TestUpsample:
    def test_single_value(self):
        out = upsample2x(Tensor(np.array([[[3.5]]], np.float32)))
        np.testing.assert_array_equal(out.data, np.full((1, 2, 2), 3.5, np.float32))

    def test_checkerboard_matches_loop_oracle(self):
        x = np.array([[[0.0, 1.0], [1.0, 0.0]]], np.float32)
        out = upsample2x(Tensor(x)).data
        np.testing.assert_array_equal(out, upsample2x_loops(x))


class TestConcat:
    def test_two_code_vectors(self):
        rng = derive_rng(0, "concat")
        a, b = rng.standard_normal(256).astype(np.float32), rng.standard_normal(256).astype(np.float32)
        z = concat(Tensor(a), Tensor(b))
        assert z.shape == (512,)
        np.testing.assert_array_equal(z.data[:256], a)
        np.testing.assert_array_equal(z.data[256:], b)

    def test_concat_with_empty(self):
        x = np.array([1.0, 2.0], np.float32)
        out = concat(Tensor(x), Tensor(np.zeros(0, np.float32)))
        np.testing.assert_array_equal(out.data, x)

    def test_backward_splits_gradient(self):
        a = Tensor(np.ones(3, np.float32), requires_grad=True)
        b = Tensor(np.ones(2, np.float32), requires_grad=True)
        tsum(concat(a, b)).backward()
        np.testing.assert_array_equal(a.grad, np.ones(3, np.float32))
        np.testing.assert_array_equal(b.grad, np.ones(2, np.float32))

    def test_rank_mismatch(self):
        with pytest.raises(ShapeError):
            concat(Tensor(np.zeros(3, np.float32)), Tensor(np.zeros((2, 3), np.float32)))


class TestLosses:
    def test_mse_identical_is_zero(self):
        x = derive_rng(0, "mse").standard_normal(10).astype(np.float32)
        assert mse_loss(Tensor(x), Tensor(x.copy())).item() == 0.0

    def test_mse_direct_case(self):
        assert mse_loss(Tensor([1.0, 2.0]), Tensor([0.0, 0.0])).item() == 5.0

    @pytest.mark.parametrize("trial", range(10))
    def test_mse_matches_loop_oracle(self, trial):
        rng = derive_rng(trial, "mse-oracle")
        a, b = rng.standard_normal((4, 5)), rng.standard_normal((4, 5))
        got = mse_loss(Tensor(a, dtype=np.float64), Tensor(b, dtype=np.float64)).item()
        assert abs(got - mse_sum_loops(a, b)) < 1e-10

    def test_mse_mean_reduction(self):
        got = mse_loss(Tensor([1.0, 2.0]), Tensor([0.0, 0.0]), reduction="mean").item()
        assert abs(got - 2.5) < 1e-7

    def test_mse_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mse_loss(Tensor(np.zeros(3, np.float32)), Tensor(np.zeros(4, np.float32)))

    def test_cross_entropy_certain_match_is_zero(self):
        assert cross_entropy(Tensor([1.0, 0.0, 0.0, 0.0]), np.array([1.0, 0, 0, 0], np.float32)).item() == 0.0

    def test_cross_entropy_uniform(self):
        got = cross_entropy(Tensor(np.full(4, 0.25)), np.full(4, 0.25)).item()
        assert abs(got - np.log(4.0)) < 1e-6

    @pytest.mark.parametrize("trial", range(10))
    def test_cross_entropy_matches_direct_oracle(self, trial):
        rng = derive_rng(trial, "ce-oracle")
        pred = rng.uniform(0.05, 1.0, 4)
        pred = pred / pred.sum()
        target = np.array([0.6, 0.3, 0.1, 0.0])
        got = cross_entropy(Tensor(pred, dtype=np.float64), target).item()
        assert abs(got - cross_entropy_direct(pred, target)) < 1e-10

    def test_cross_entropy_rejects_off_simplex_target(self):
        with pytest.raises(ValidationError):
            cross_entropy(Tensor(np.full(4, 0.25)), np.array([0.5, 0.5, 0.5, 0.5]))

    @pytest.mark.parametrize("trial", range(20))
    def test_losses_nonnegative(self, trial):
        rng = derive_rng(trial, "loss-sign")
        a, b = rng.standard_normal(6), rng.standard_normal(6)
        assert mse_loss(Tensor(a), Tensor(b)).item() >= 0.0
        pred = np.abs(rng.standard_normal(4)) + 1e-3
        pred /= pred.sum()
        target = np.abs(rng.standard_normal(4)) + 1e-3
        target /= target.sum()
        assert cross_entropy(Tensor(pred), target.astype(np.float32)).item() >= 0.0


class TestBackward:
    def test_sum_gradient_is_ones(self):
        x = Tensor(derive_rng(0, "bk").standard_normal((3, 4)), requires_grad=True)
        tsum(x).backward()
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_reuse_accumulates(self):
        x = Tensor(np.array([2.0, 3.0]), requires_grad=True)
        tsum(x + x).backward()
        np.testing.assert_array_equal(x.grad, np.full(2, 2.0))

    def test_non_scalar_root_rejected(self):
        x = Tensor(np.zeros(3, np.float32), requires_grad=True)
        with pytest.raises(ShapeError):
            (x + x).backward()

    def test_unreached_parameter_keeps_zero_gradient(self):
        used = Tensor(np.ones(3), requires_grad=True)
        unused = Tensor(np.ones(3), requires_grad=True)
        tsum(used).backward()
        np.testing.assert_array_equal(unused.grad, np.zeros(3))

    def test_mse_of_dense_matches_finite_differences(self):
        rng = derive_rng(4, "bk-dense")
        x = Tensor(rng.standard_normal(4), requires_grad=True, dtype=np.float64)
        w = Tensor(rng.standard_normal((3, 4)), requires_grad=True, dtype=np.float64)
        b = Tensor(rng.standard_normal(3), requires_grad=True, dtype=np.float64)
        target = rng.standard_normal(3)
        mse_loss(dense(x, w, b), Tensor(target, dtype=np.float64)).backward()
        for leaf, builder in (
            (x, lambda t: mse_loss(dense(t, w.detach(), b.detach()), Tensor(target, dtype=np.float64))),
            (w, lambda t: mse_loss(dense(x.detach(), t, b.detach()), Tensor(target, dtype=np.float64))),
            (b, lambda t: mse_loss(dense(x.detach(), w.detach(), t), Tensor(target, dtype=np.float64))),
        ):
            numeric = finite_diff_gradient(builder, Tensor(leaf.data.copy(), dtype=np.float64))
            assert relative_error(leaf.grad, numeric) < 1e-4

    def test_graph_record_is_topologically_ordered(self):
        x = Tensor(np.ones(3), requires_grad=True)
        y = tsum(relu(x + x))
        record = graph_record(y)
        seen = set()
        for entry in record:
            assert all(i in seen for i in entry.input_ids if i in {e.output_id for e in record})
            seen.add(entry.output_id)
        assert record[-1].op == "sum"


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        p = Tensor(np.array([1.0, -2.0], np.float32), requires_grad=True)
        opt = Adam([p], lr=0.1)
        opt.zero_grad()
        opt.step()
        np.testing.assert_array_equal(p.data, np.array([1.0, -2.0], np.float32))

    def test_first_step_matches_hand_computation(self):
        p = Tensor(np.array([0.0]), requires_grad=True)
        opt = Adam([p], lr=0.1)
        p.grad = np.array([1.0])
        opt.step()
        expected = adam_first_step(np.array([0.0]), np.array([1.0]), lr=0.1)
        assert abs(p.data[0] - expected[0]) < 1e-9
        assert abs(p.data[0] + 0.1) < 1e-7  # bias-corrected first step has size lr

    def test_converges_on_quadratic(self):
        w = Tensor(np.array([0.0]), requires_grad=True)
        opt = Adam([w], lr=0.1)
        for _ in range(100):
            loss = mse_loss(w, Tensor(np.array([3.0])))
            opt.zero_grad()
            loss.backward()
            opt.step()
        assert abs(w.data[0] - 3.0) < 0.05


class TestDeterminism:
    def test_ops_bit_identical_across_runs(self):
        def run():
            rng = derive_rng(9, "det")
            x = Tensor(rng.standard_normal((2, 8, 8)).astype(np.float32), requires_grad=True)
            k = Tensor(rng.standard_normal((4, 2, 3, 3)).astype(np.float32) * 0.1, requires_grad=True)
            h = relu(conv2d(x, k, Tensor(np.zeros(4, np.float32)), stride=2))
            h = dropout(h, 0.5, rng=derive_rng(9, "det-mask"), mode="train")
            loss = tsum(h)
            loss.backward()
            return h.data.copy(), x.grad.copy()

        a_out, a_grad = run()
        b_out, b_grad = run()
        np.testing.assert_array_equal(a_out, b_out)
        np.testing.assert_array_equal(a_grad, b_grad)


class TestGradientSuite:
    """Finite-difference verification of every differentiable op."""

    @pytest.mark.parametrize("name", sorted(op_cases(0)))
    def test_op_gradients(self, name):
        worst = 0.0
        for trial in range(3):
            build, arrays = op_cases(trial)[name]
            worst = max(worst, check_op_gradients(build, arrays, seed=trial))
        assert worst < REL_TOL, f"{name}: worst relative error {worst}"


def test_finite_diff_gradient_of_sum_is_ones():
    x = Tensor(np.arange(4, dtype=np.float64))
    np.testing.assert_allclose(finite_diff_gradient(tsum, x), np.ones(4), atol=1e-6)


def test_finite_diff_gradient_of_norm():
    x = Tensor(np.array([1.0, 2.0]))
    grad = finite_diff_gradient(lambda t: mse_loss(t, Tensor(np.zeros(2))), x)
    np.testing.assert_allclose(grad, [2.0, 4.0], atol=1e-6)
