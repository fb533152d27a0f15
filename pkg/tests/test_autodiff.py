import math

import numpy as np
import pytest

from diagseq import autodiff as ad
from oracles import naive_concurrent_softmax_loss


def _mul(a, b):
    """Elementwise product; weighting outputs keeps test gradients nondegenerate."""
    req = a.requires_grad or b.requires_grad
    out = ad.Tensor(a.data * b.data, requires_grad=req,
                    _parents=(a, b) if req else ())

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    out._backward = bwd if req else None
    return out


class TestMatmul:
    def test_identity(self):
        x = np.arange(6, dtype=float).reshape(2, 3)
        out = ad.matmul(ad.Tensor(np.eye(2)), ad.Tensor(x))
        np.testing.assert_array_equal(out.data, x)

    def test_hand_arithmetic(self):
        out = ad.matmul(ad.Tensor([[1.0, 2.0]]), ad.Tensor([[3.0], [4.0]]))
        assert out.data.tolist() == [[11.0]]

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
            ad.matmul(ad.Tensor(np.zeros((2, 3))), ad.Tensor(np.zeros((2, 2))))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(0)
        a = ad.Parameter(rng.normal(size=(3, 4)))
        b = ad.Parameter(rng.normal(size=(4, 2)))
        w = rng.normal(size=(3, 2))

        def f():
            return ad.mean(_mul(ad.matmul(a.tensor, b.tensor), ad.Tensor(w)))

        assert ad.grad_check(f, [a, b]) < 1e-4

    def test_batched_gradients(self):
        rng = np.random.default_rng(1)
        a = ad.Parameter(rng.normal(size=(2, 3, 4)))
        b = ad.Parameter(rng.normal(size=(4, 5)))

        def f():
            return ad.mean(ad.matmul(a.tensor, b.tensor))

        assert ad.grad_check(f, [a, b]) < 1e-4


class TestMaskedSoftmax:
    def test_uniform(self):
        out = ad.masked_softmax(ad.Tensor(np.zeros((1, 4))), np.zeros((1, 4)))
        np.testing.assert_allclose(out.data, 0.25)

    def test_single_visible_key(self):
        out = ad.masked_softmax(ad.Tensor(np.zeros((1, 2))), np.array([[0.0, ad.MASK_NEG]]))
        np.testing.assert_allclose(out.data, [[1.0, 0.0]])

    def test_hand_computation(self):
        scores = ad.Tensor(np.array([[1.0, 2.0, 3.0]]))
        mask = np.array([[0.0, 0.0, ad.MASK_NEG]])
        out = ad.masked_softmax(scores, mask).data[0]
        e1, e2 = math.exp(1), math.exp(2)
        np.testing.assert_allclose(out[:2], [e1 / (e1 + e2), e2 / (e1 + e2)], rtol=1e-12)
        assert out[2] == 0.0

    def test_fully_masked_row_raises(self):
        with pytest.raises(ad.MaskError):
            ad.masked_softmax(ad.Tensor(np.zeros((1, 3))), np.full((1, 3), ad.MASK_NEG))

    def test_rows_sum_to_one_and_masked_exact_zero(self):
        rng = np.random.default_rng(2)
        scores = rng.normal(size=(6, 9)) * 4
        visible = rng.random((6, 9)) < 0.5
        visible[:, 0] = True  # keep every row legal
        out = ad.masked_softmax(ad.Tensor(scores), visible).data
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-6)
        assert np.abs(out[~visible]).max() <= 1e-7

    def test_gradients(self):
        rng = np.random.default_rng(3)
        s = ad.Parameter(rng.normal(size=(4, 6)))
        visible = rng.random((4, 6)) < 0.6
        visible[:, 2] = True
        w = rng.normal(size=(4, 6))

        def f():
            return ad.mean(_mul(ad.masked_softmax(s.tensor, visible), ad.Tensor(w)))

        assert ad.grad_check(f, [s]) < 1e-4


class TestLayerNorm:
    def test_constant_vector_gives_bias(self):
        x = ad.Tensor(np.full((3, 5), 7.0))
        bias = np.arange(5.0)
        out = ad.layer_norm(x, ad.Tensor(np.ones(5)), ad.Tensor(bias))
        np.testing.assert_allclose(out.data, np.tile(bias, (3, 1)), atol=1e-12)

    def test_two_point_hand_case(self):
        # mean 0, var 1 -> values scaled by 1/sqrt(1 + eps)
        eps = 1e-5
        out = ad.layer_norm(ad.Tensor(np.array([[1.0, -1.0]])),
                            ad.Tensor(np.ones(2)), ad.Tensor(np.zeros(2)), eps=eps)
        expected = np.array([[1.0, -1.0]]) / math.sqrt(1.0 + eps)
        np.testing.assert_allclose(out.data, expected, rtol=1e-12)
        np.testing.assert_allclose(out.data, [[1.0, -1.0]], atol=1e-4)

    def test_gradients(self):
        rng = np.random.default_rng(4)
        x = ad.Parameter(rng.normal(size=(3, 8)))
        g = ad.Parameter(rng.normal(size=8))
        b = ad.Parameter(rng.normal(size=8))
        w = rng.normal(size=(3, 8))

        def f():
            return ad.mean(_mul(ad.layer_norm(x.tensor, g.tensor, b.tensor), ad.Tensor(w)))

        assert ad.grad_check(f, [x, g, b]) < 1e-4


class TestCrossEntropy:
    def test_uniform_logits(self):
        out = ad.cross_entropy(ad.Tensor(np.zeros(4)), 2)
        assert out.item() == pytest.approx(math.log(4), rel=1e-12)

    def test_extreme_logits_hand_value(self):
        out = ad.cross_entropy(ad.Tensor(np.array([10.0, -10.0])), 0)
        assert out.item() == pytest.approx(math.log1p(math.exp(-20.0)), rel=1e-9)
        assert out.item() == pytest.approx(2.061e-9, rel=1e-3)

    def test_gradient_closed_form(self):
        rng = np.random.default_rng(5)
        z = ad.Tensor(rng.normal(size=7), requires_grad=True)
        loss = ad.cross_entropy(z, 3)
        loss.backward()
        expected = ad.softmax_np(z.data)
        expected[3] -= 1.0
        np.testing.assert_allclose(z.grad, expected, atol=1e-12)

    def test_label_out_of_range(self):
        with pytest.raises(IndexError):
            ad.cross_entropy(ad.Tensor(np.zeros(3)), 3)


class TestConcurrentSoftmaxLoss:
    def test_singleton_equals_cross_entropy(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            z = rng.normal(size=9) * 3
            label = int(rng.integers(9))
            a = ad.concurrent_softmax_loss(ad.Tensor(z), [label]).item()
            b = ad.cross_entropy(ad.Tensor(z), label).item()
            assert abs(a - b) < 1e-9

    def test_hand_case_two_of_three(self):
        loss = ad.concurrent_softmax_loss(ad.Tensor(np.zeros(3)), {0, 1})
        assert loss.item() == pytest.approx(math.log(2), rel=1e-12)

    def test_all_labeled_is_zero(self):
        z = np.array([0.3, -1.2, 2.0, 0.0])
        loss = ad.concurrent_softmax_loss(ad.Tensor(z), {0, 1, 2, 3})
        assert loss.item() == pytest.approx(0.0, abs=1e-12)

    def test_empty_label_set_rejected(self):
        with pytest.raises(ValueError):
            ad.concurrent_softmax_loss(ad.Tensor(np.zeros(3)), set())

    def test_out_of_range_label_rejected(self):
        with pytest.raises(IndexError):
            ad.concurrent_softmax_loss(ad.Tensor(np.zeros(3)), {5})

    def test_matches_naive_transliteration(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            c = int(rng.integers(2, 12))
            z = rng.normal(size=c) * 5
            n_labels = int(rng.integers(1, c + 1))
            labels = set(rng.choice(c, size=n_labels, replace=False).tolist())
            mine = ad.concurrent_softmax_loss(ad.Tensor(z), labels).item()
            ref = naive_concurrent_softmax_loss(z, labels)
            assert abs(mine - ref) < 1e-9

    def test_gradients_two_labels(self):
        rng = np.random.default_rng(8)
        z = ad.Parameter(rng.normal(size=6))

        def f():
            return ad.concurrent_softmax_loss(z.tensor, [1, 4])

        assert ad.grad_check(f, [z]) < 1e-5

    def test_batched_rows_match_single(self):
        rng = np.random.default_rng(9)
        z = rng.normal(size=(3, 5))
        sets = [[0], [1, 2], [4, 0, 3]]
        batched = ad.concurrent_softmax_loss(ad.Tensor(z), sets).data
        for i in range(3):
            single = ad.concurrent_softmax_loss(ad.Tensor(z[i]), sets[i]).item()
            assert batched[i] == pytest.approx(single, rel=1e-12)


class TestAdam:
    def test_zero_gradient_leaves_parameter_unchanged(self):
        p = ad.Parameter(np.array([1.0, 2.0]))
        before = p.data.copy()
        ad.adam_step([p], lr=0.1)  # no grad accumulated
        np.testing.assert_array_equal(p.data, before)
        p.tensor.grad = np.zeros(2)
        ad.adam_step([p], lr=0.1)
        np.testing.assert_array_equal(p.data, before)

    def test_descent_direction_on_square(self):
        w = ad.Parameter(np.array([1.0]))
        loss = _mul(w.tensor, w.tensor)
        ad.mean(loss).backward()
        ad.adam_step([w], lr=0.1)
        assert w.data[0] < 1.0

    def test_monotone_decrease_on_quadratic(self):
        w = ad.Parameter(np.array([3.0, -2.0]))
        target = np.array([0.5, 1.5])
        values = []
        for _ in range(10):
            diff = ad.add(w.tensor, ad.Tensor(-target))
            loss = ad.mean(_mul(diff, diff))
            values.append(loss.item())
            loss.backward()
            ad.adam_step([w], lr=0.05)
        diff = ad.add(w.tensor, ad.Tensor(-target))
        values.append(ad.mean(_mul(diff, diff)).item())
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_deterministic_given_identical_state(self):
        results = []
        for _ in range(2):
            p = ad.Parameter(np.array([1.0, -1.0, 0.5]))
            p.tensor.grad = np.array([0.3, -0.2, 0.1])
            ad.adam_step([p], lr=0.01)
            results.append(p.data.copy())
        np.testing.assert_array_equal(results[0], results[1])

    def test_gradients_zeroed_after_step(self):
        p = ad.Parameter(np.ones(2))
        p.tensor.grad = np.ones(2)
        ad.adam_step([p], lr=0.01)
        assert p.tensor.grad is None


class TestGradCheck:
    def test_linear_function_tiny_error(self):
        w = ad.Parameter(np.array([1.0, 2.0, 3.0]))
        c = np.array([0.5, -1.5, 2.5])

        def f():
            return ad.mean(_mul(w.tensor, ad.Tensor(c)))

        assert ad.grad_check(f, [w]) < 1e-6

    def test_structural_ops_randomized(self):
        rng = np.random.default_rng(10)
        table = ad.Parameter(rng.normal(size=(5, 4)))
        x = ad.Parameter(rng.normal(size=(2, 3, 4)))
        ids = rng.integers(0, 5, size=(2, 3))
        w = rng.normal(size=(2, 3, 4))

        def f():
            emb = ad.embedding(table.tensor, ids)
            both = ad.add(emb, ad.transpose(ad.reshape(x.tensor, (3, 2, 4)), (1, 0, 2)))
            g = ad.gelu(both)
            rows = ad.take_positions(g, np.array([0, 1, 1]), np.array([2, 0, 1]))
            picked = ad.mean(_mul(rows, ad.Tensor(w[0].reshape(3, 4))))
            seg = ad.segment_mean(ad.reshape(rows, (12,)), np.repeat([0, 1], 6), 2)
            return ad.add(picked, ad.mean(seg))

        assert ad.grad_check(f, [table, x]) < 1e-4

    def test_dropout_backward_matches_mask(self):
        rng = np.random.default_rng(11)
        x = ad.Tensor(rng.normal(size=(50,)), requires_grad=True)
        out = ad.dropout(x, 0.4, np.random.default_rng(3))
        kept = out.data != 0
        ad.mean(out).backward()
        np.testing.assert_allclose(x.grad[~kept], 0.0)
        np.testing.assert_allclose(x.grad[kept], 1.0 / 50 / 0.6, rtol=1e-12)
