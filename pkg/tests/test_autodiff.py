import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tsc_uda import autodiff as ad
from tsc_uda.autodiff import Tensor

from gradcheck import numerical_grad, relative_error


def _check_unary(op, x0, tol=1e-6):
    x = Tensor(x0.copy(), requires_grad=True)
    w = np.random.default_rng(1).normal(size=x0.shape)  # random linear functional of the output

    def f():
        return float((op(Tensor(x.data)).data * w).sum())

    ad.backward(ad.sum(ad.mul(op(x), Tensor(w))))
    num = numerical_grad(f, x.data)
    assert relative_error(x.grad, num).max() < tol


class TestMatmul:
    def test_identity(self):
        out = ad.matmul(Tensor(np.eye(2)), Tensor([[3.0, 4.0], [5.0, 6.0]]))
        np.testing.assert_array_equal(out.data, [[3, 4], [5, 6]])

    def test_row_times_column(self):
        assert ad.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]])).data.tolist() == [[11.0]]

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 3\)"):
            ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_gradient_vs_finite_differences(self):
        rng = np.random.default_rng(0)
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        ad.backward(ad.sum(ad.matmul(a, b)))
        num_a = numerical_grad(lambda: float((a.data @ b.data).sum()), a.data)
        num_b = numerical_grad(lambda: float((a.data @ b.data).sum()), b.data)
        assert relative_error(a.grad, num_a).max() < 1e-6
        assert relative_error(b.grad, num_b).max() < 1e-6


class TestElementwise:
    def test_relu(self):
        assert ad.relu(Tensor([-1.0, 0.0, 2.0])).data.tolist() == [0.0, 0.0, 2.0]

    def test_sigmoid_at_zero(self):
        assert ad.sigmoid(Tensor(0.0)).item() == 0.5

    def test_sigmoid_extremes_are_finite(self):
        y = ad.sigmoid(Tensor([-800.0, 800.0])).data
        assert np.isfinite(y).all() and y[0] >= 0 and y[1] == 1.0

    def test_log_sigmoid_matches_log_of_sigmoid(self):
        z = np.linspace(-20, 20, 41)
        np.testing.assert_allclose(ad.log_sigmoid(Tensor(z)).data, np.log(ad.sigmoid(Tensor(z)).data),
                                   rtol=1e-12, atol=1e-14)

    def test_log_sigmoid_saturated_keeps_gradient(self):
        z = Tensor([-800.0, 800.0], requires_grad=True)
        y = ad.log_sigmoid(z)
        assert y.data.tolist() == [-800.0, 0.0]
        ad.backward(ad.sum(y))
        assert z.grad.tolist() == [1.0, 0.0]

    def test_log_rejects_non_positive(self):
        with pytest.raises(ValueError, match="non-positive"):
            ad.log(Tensor([1.0, 0.0]))

    def test_add_shape_mismatch(self):
        with pytest.raises(ValueError):
            ad.add(Tensor(np.ones(3)), Tensor(np.ones(2)))

    @pytest.mark.parametrize("name,op,domain", [
        ("relu", ad.relu, "away_from_zero"),
        ("tanh", ad.tanh, "any"),
        ("sigmoid", ad.sigmoid, "any"),
        ("log_sigmoid", ad.log_sigmoid, "any"),
        ("log", ad.log, "positive"),
        ("exp", ad.exp, "any"),
        ("scale", lambda t: ad.scale(t, -2.5), "any"),
        ("neg", ad.neg, "any"),
        ("clamp", lambda t: ad.clamp(t, -10.0, 10.0), "any"),
        ("softmax", ad.softmax, "any"),
        ("log_softmax", ad.log_softmax, "any"),
        ("grl", lambda t: ad.grl(t, 0.7), "any"),
    ])
    def test_gradient_at_random_points(self, name, op, domain):
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        for _ in range(10):
            x0 = rng.normal(size=(2, 5))
            if domain == "positive":
                x0 = np.abs(x0) + 0.1
            elif domain == "away_from_zero":
                x0 = np.sign(x0) * (np.abs(x0) + 0.1)
            if name == "grl":
                # grl is not the derivative of its forward; compare with the reversal law instead
                x = Tensor(x0, requires_grad=True)
                ad.backward(ad.sum(op(x)))
                np.testing.assert_array_equal(x.grad, -0.7 * np.ones_like(x0))
                continue
            _check_unary(op, x0)

    @pytest.mark.parametrize("binary", [ad.add, ad.sub, ad.mul])
    def test_binary_gradients_with_broadcast(self, binary):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
            b = Tensor(rng.normal(size=(3,)), requires_grad=True)
            w = rng.normal(size=(4, 3))
            ad.backward(ad.sum(ad.mul(binary(a, b), Tensor(w))))

            def f():
                return float((binary(Tensor(a.data), Tensor(b.data)).data * w).sum())

            assert relative_error(a.grad, numerical_grad(f, a.data)).max() < 1e-6
            assert relative_error(b.grad, numerical_grad(f, b.data)).max() < 1e-6

    def test_take_and_mean_gradients(self):
        rng = np.random.default_rng(4)
        x = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
        idx = np.array([0, 2, 2, 1, 0])
        ad.backward(ad.mean(ad.take(x, idx)))
        expected = np.zeros((5, 3))
        expected[np.arange(5), idx] = 0.2
        np.testing.assert_allclose(x.grad, expected, rtol=0, atol=1e-15)

    def test_clamp_blocks_gradient_outside(self):
        x = Tensor([-2.0, 0.5, 3.0], requires_grad=True)
        ad.backward(ad.sum(ad.clamp(x, 0.0, 1.0)))
        assert x.grad.tolist() == [0.0, 1.0, 0.0]


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(ad.softmax(Tensor([[0.0, 0.0, 0.0]])).data, [[1 / 3] * 3], rtol=0, atol=1e-15)

    def test_no_overflow(self):
        s = ad.softmax(Tensor([[1000.0, 0.0]])).data
        assert np.isfinite(s).all()
        assert s[0, 0] == pytest.approx(1.0) and s[0, 1] == pytest.approx(0.0, abs=1e-300)

    def test_row_sums(self):
        s = ad.softmax(Tensor(np.random.default_rng(5).normal(size=(8, 5)))).data
        assert np.abs(s.sum(axis=1) - 1).max() < 1e-9

    def test_needs_two_classes(self):
        with pytest.raises(ValueError):
            ad.softmax(Tensor(np.zeros((3, 1))))

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(2, 6)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
    def test_rows_are_probability_vectors(self, z):
        s = ad.softmax(Tensor(z)).data
        assert (s >= 0).all()
        assert np.abs(s.sum(axis=1) - 1).max() < 1e-9


class TestGrl:
    def test_forward_is_identity(self):
        assert ad.grl(Tensor([1.0, 2.0, 3.0]), 1.0).data.tolist() == [1.0, 2.0, 3.0]

    def test_backward_flips(self):
        x = Tensor([0.3, -0.4], requires_grad=True)
        ad.backward(ad.sum(ad.grl(x, 1.0)))
        assert x.grad.tolist() == [-1.0, -1.0]

    def test_negative_coeff_rejected(self):
        with pytest.raises(ValueError):
            ad.grl(Tensor([1.0]), -0.5)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 10.0))
    def test_sign_law(self, seed, c):
        rng = np.random.default_rng(seed)
        x0 = rng.normal(size=(3, 4))
        w = rng.normal(size=(4, 2))

        def loss(t):
            return ad.sum(ad.tanh(ad.matmul(t, Tensor(w))))

        plain = Tensor(x0, requires_grad=True)
        ad.backward(loss(plain))
        rev = Tensor(x0, requires_grad=True)
        ad.backward(loss(ad.grl(rev, c)))
        np.testing.assert_array_equal(rev.grad, -c * plain.grad)


class TestBackward:
    def test_sum(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        ad.backward(ad.sum(x))
        assert x.grad.tolist() == [1.0, 1.0, 1.0]

    def test_square(self):
        x = Tensor(3.0, requires_grad=True)
        ad.backward(ad.mul(x, x))
        assert x.grad == 6.0

    def test_loss_grad_is_one(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        loss = ad.sum(x)
        ad.backward(loss)
        assert loss.grad == 1.0

    def test_non_scalar_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            ad.backward(ad.scale(x, 2.0))

    def test_leaf_gradients_accumulate_until_zeroed(self):
        x = Tensor([1.0], requires_grad=True)
        ad.backward(ad.sum(x))
        ad.backward(ad.sum(x))
        assert x.grad.tolist() == [2.0]
        ad.zero_grad([x])
        assert x.grad.tolist() == [0.0]

    def test_graph_order(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        y = ad.relu(ad.matmul(x, x))
        loss = ad.sum(ad.add(y, x))
        graph = ad.backward(loss)
        assert graph.check_order()
        assert graph.nodes[0] is x and graph.nodes[-1] is loss
        ids = [t.node_id for t in graph.nodes]
        assert ids == sorted(ids)

    def test_no_grad_records_nothing(self):
        x = Tensor([1.0], requires_grad=True)
        with ad.no_grad():
            y = ad.scale(x, 2.0)
        assert not y.requires_grad and y.is_leaf

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        x0, w0 = rng.normal(size=(4, 3)), rng.normal(size=(3, 3))

        def once():
            x, w = Tensor(x0, requires_grad=True), Tensor(w0, requires_grad=True)
            loss = ad.mean(ad.log_softmax(ad.tanh(ad.matmul(x, w))))
            ad.backward(loss)
            return loss.data.tobytes(), x.grad.tobytes(), w.grad.tobytes()

        assert once() == once()

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_non_finite_detected(self):
        x = Tensor([800.0], requires_grad=True)
        with pytest.raises(FloatingPointError):
            ad.backward(ad.sum(ad.exp(x)))
