import numpy as np
import pytest

from cdc_incent import _kernels_numpy, auction, kernels
from cdc_incent.model import ValuationDistribution

numba_kernels = pytest.importorskip("cdc_incent._kernels_numba")


def _problem(I, kind="arithmetic", param=0.05):
    dist = ValuationDistribution.tabulated(np.linspace(0, 1, 5), [1.0, 1.5, 1.0, 0.7, 1.2])
    x, d, c = dist.knots()
    rewards = auction.make_reward_schedule(kind, min(4, I), 1.0, param)
    return np.linspace(0, 1, 300), x, d, c, auction._score_coefficients(rewards, I)


@pytest.mark.parametrize("I", [2, 5, 12])
def test_score_density_backends_agree(I):
    grid, x, d, c, coef = _problem(I)
    np.testing.assert_allclose(
        numba_kernels.score_density(grid, x, d, c, coef), _kernels_numpy.score_density(grid, x, d, c, coef),
        rtol=1e-13, atol=1e-15,
    )


@pytest.mark.parametrize("I", [2, 5, 12])
def test_score_increments_backends_agree(I):
    grid, x, d, c, coef = _problem(I)
    a, sa = numba_kernels.score_increments(grid, x, d, c, coef, 1e-10, 40)
    b, sb = _kernels_numpy.score_increments(grid, x, d, c, coef, 1e-10, 40)
    assert sa != kernels.FAIL_DEPTH and sb != kernels.FAIL_DEPTH
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_score_increments_depth_failure_is_reported():
    grid, x, d, c, coef = _problem(5)
    for mod in (numba_kernels, _kernels_numpy):
        _, status = mod.score_increments(grid, x, d, c, coef, 1e-30, 1)
        assert status == kernels.FAIL_DEPTH


@pytest.mark.parametrize("p", [2**31 - 1, 65521, 7])
def test_modmatmul_backends_agree_with_python_ints(p):
    rng = np.random.default_rng(p)
    A = rng.integers(0, p, size=(7, 5), dtype=np.int64)
    B = rng.integers(0, p, size=(5, 3), dtype=np.int64)
    exact = np.array([[sum(int(A[i, k]) * int(B[k, j]) for k in range(5)) % p for j in range(3)] for i in range(7)])
    np.testing.assert_array_equal(numba_kernels.modmatmul(A, B, p), exact)
    np.testing.assert_array_equal(_kernels_numpy.modmatmul(A, B, p), exact)


def test_backend_selection_is_reported():
    assert kernels.BACKEND in kernels.backends()
