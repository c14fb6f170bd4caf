import numpy as np
import pytest
from hypothesis import given, strategies as st

from twinbench.kernels import KernelSpec, gram


def test_linear_dot_product():
    assert gram([[1.0, 0.0]], [[1.0, 0.0]], KernelSpec.linear())[0, 0] == 1.0


def test_gaussian_identical_points():
    assert gram([[0.3, -2.0]], [[0.3, -2.0]], KernelSpec.gaussian(0.7))[0, 0] == 1.0


def test_gaussian_unit_distance():
    assert gram([[0.0, 0.0]], [[1.0, 0.0]], KernelSpec.gaussian(1.0))[0, 0] == pytest.approx(0.36788, abs=1e-5)


def test_kernel_errors():
    with pytest.raises(ValueError):
        gram(np.ones((2, 3)), np.ones((2, 2)), KernelSpec.linear())
    with pytest.raises(ValueError):
        KernelSpec.gaussian(0.0)
    with pytest.raises(ValueError):
        KernelSpec("poly")


@given(st.integers(0, 10 ** 6), st.integers(1, 12), st.integers(1, 5), st.sampled_from([2.0 ** i for i in range(-10, 11)]))
def test_gaussian_gram_properties(seed, n, d, gamma):
    A = np.random.default_rng(seed).normal(size=(n, d))
    K = gram(A, A, KernelSpec.gaussian(gamma))
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    np.testing.assert_array_equal(np.diag(K), 1.0)
    assert np.all((K >= 0) & (K <= 1))


@given(st.integers(0, 10 ** 6), st.integers(1, 8), st.integers(1, 8), st.integers(1, 5))
def test_linear_gram_is_matrix_product(seed, n, m, d):
    r = np.random.default_rng(seed)
    A, C = r.normal(size=(n, d)), r.normal(size=(m, d))
    np.testing.assert_allclose(gram(A, C, KernelSpec.linear()), A @ C.T, atol=1e-12)
