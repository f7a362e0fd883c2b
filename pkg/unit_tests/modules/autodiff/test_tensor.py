import numpy as np
import pytest

from secnet.common.errors import DimensionError, GraphError
from secnet.modules.autodiff.ops import add, conv2d, mul, relu, scale, sum_all
from secnet.modules.autodiff.tensor import Tensor, no_grad


class TestBackward:
    def test_sum_gives_ones(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        sum_all(x).backward()
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_square_gives_twice_input(self):
        data = np.random.default_rng(0).normal(size=(3, 3))
        x = Tensor(data, requires_grad=True)
        sum_all(mul(x, x)).backward()
        np.testing.assert_allclose(x.grad, 2 * data)

    def test_reused_tensor_sums_both_paths(self):
        rng = np.random.default_rng(1)
        data, kernel = rng.normal(size=(1, 4, 4)), rng.normal(size=(1, 1, 3, 3))

        x = Tensor(data, requires_grad=True)
        k = Tensor(kernel)
        b = Tensor(np.zeros(1))
        sum_all(add(relu(conv2d(x, k, b, pad=1)), scale(x, 3.0))).backward()

        first = Tensor(data, requires_grad=True)
        sum_all(relu(conv2d(first, k, b, pad=1))).backward()
        second = Tensor(data, requires_grad=True)
        sum_all(scale(second, 3.0)).backward()

        np.testing.assert_allclose(x.grad, first.grad + second.grad, atol=1e-14)

    def test_gradients_accumulate_across_losses(self):
        x = Tensor(np.ones(3), requires_grad=True)
        sum_all(x).backward()
        sum_all(scale(x, 2.0)).backward()
        np.testing.assert_array_equal(x.grad, np.full(3, 3.0))

    def test_reverse_execution_order_on_deep_chain(self):
        x = Tensor(np.array([0.5]), requires_grad=True)
        y = x
        for _ in range(200):
            y = scale(y, 1.01)
        sum_all(y).backward()
        assert x.grad[0] == pytest.approx(1.01**200)

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(GraphError):
            scale(x, 2.0).backward()

    def test_disconnected_loss_rejected(self):
        loss = sum_all(Tensor(np.ones(3)))
        with pytest.raises(GraphError):
            loss.backward()

    def test_second_backward_rejected(self):
        x = Tensor(np.ones(3), requires_grad=True)
        loss = sum_all(mul(x, x))
        loss.backward()
        with pytest.raises(GraphError):
            loss.backward()

    def test_shared_subgraph_after_free_rejected(self):
        x = Tensor(np.ones(3), requires_grad=True)
        hidden = scale(x, 2.0)
        sum_all(hidden).backward()
        with pytest.raises(GraphError):
            sum_all(hidden).backward()


class TestNoGrad:
    def test_no_graph_recorded(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            y = scale(x, 2.0)
        assert y.creator is None
        assert not y.requires_grad

    def test_restored_after_block(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            pass
        assert scale(x, 2.0).requires_grad

    def test_detach_cuts_gradient(self):
        x = Tensor(np.ones(3), requires_grad=True)
        y = Tensor(np.ones(3), requires_grad=True)
        sum_all(add(scale(x, 2.0).detach(), y)).backward()
        assert x.grad is None
        np.testing.assert_array_equal(y.grad, np.ones(3))


class TestItem:
    def test_single_value(self):
        assert Tensor(np.array([[2.5]])).item() == 2.5

    def test_non_scalar_rejected(self):
        with pytest.raises(DimensionError) as exc:
            Tensor(np.zeros((2, 3))).item()
        assert "(2, 3)" in str(exc.value)
