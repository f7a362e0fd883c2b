import numpy as np
import pytest

from secnet.modules.autodiff.grad_check import numeric_gradient, primitive_suite, relative_error, sampled_numeric_gradient


class TestRelativeError:
    def test_both_zero(self):
        assert relative_error(np.zeros(3), np.zeros(3)) == 0.0

    def test_opposite_vectors(self):
        assert relative_error(np.ones(3), -np.ones(3)) == pytest.approx(1.0)


class TestNumericGradient:
    def test_quadratic(self):
        x = np.array([1.0, -2.0, 0.5])
        grad = numeric_gradient(lambda: float(np.sum(x**2)), x)
        np.testing.assert_allclose(grad, 2 * x, atol=1e-8)
        np.testing.assert_array_equal(x, [1.0, -2.0, 0.5])

    def test_sampled_entries(self):
        x = np.arange(12, dtype=np.float64).reshape(3, 4)
        grad = sampled_numeric_gradient(lambda: float(np.sum(x**3)), x, np.array([0, 5, 11]))
        np.testing.assert_allclose(grad, 3 * np.array([0.0, 25.0, 121.0]), rtol=1e-7, atol=1e-5)
        assert x[1, 1] == 5.0


class TestPrimitiveSuite:
    @pytest.mark.parametrize("seed", range(20))
    def test_every_op_passes(self, seed):
        rows = primitive_suite(seed)
        assert {row.op for row in rows} >= {"conv2d", "transpose_conv2d", "pixel_shuffle", "pixel_unshuffle", "bilinear_sample", "mse_loss"}
        failing = [row for row in rows if not row.ok]
        assert failing == []
