import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from cdc_incent import orderstats
from cdc_incent.model import ValuationDistribution
from cdc_incent.orderstats import OrderStatQuery, binom, cdf_kth_highest, pdf_kth_highest

U = ValuationDistribution.uniform()
V = np.linspace(0.0, 1.0, 41)


def test_max_of_four_density():
    np.testing.assert_allclose(pdf_kth_highest(1, 4, U, V), 4 * V**3, rtol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_minimum_density(n):
    np.testing.assert_allclose(pdf_kth_highest(n, n, U, V), n * (1 - V) ** (n - 1), rtol=1e-13)


def test_printed_cdf_values():
    assert float(cdf_kth_highest(1, 5, U, 0.5)) == pytest.approx(0.03125, abs=1e-15)
    assert float(cdf_kth_highest(2, 5, U, 0.5)) == pytest.approx(0.1875, abs=1e-15)


def test_second_highest_of_five_by_monte_carlo():
    draws = np.random.default_rng(11).random((1_000_000, 5))
    second = np.sort(draws, axis=1)[:, -2]
    assert np.mean(second <= 0.5) == pytest.approx(0.1875, abs=1e-3)


@pytest.mark.parametrize("n", range(1, 11))
def test_density_integrates_to_one(n):
    for k in range(1, n + 1):
        area, _ = integrate.quad(lambda t: float(pdf_kth_highest(k, n, U, t)), 0, 1, epsabs=1e-13)
        assert area == pytest.approx(1.0, abs=1e-8)


def test_matches_beta_distribution():
    # the k-th highest of n uniforms is Beta(n - k + 1, k)
    for n in (3, 7, 12):
        for k in range(1, n + 1):
            ref = stats.beta(n - k + 1, k)
            np.testing.assert_allclose(cdf_kth_highest(k, n, U, V), ref.cdf(V), atol=1e-13)
            np.testing.assert_allclose(pdf_kth_highest(k, n, U, V), ref.pdf(V), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("n", [1, 4, 10, 25])
def test_sum_rule(n):
    total = sum(pdf_kth_highest(k, n, U, V) for k in range(1, n + 1))
    np.testing.assert_allclose(total, n * U.pdf(V), atol=1e-9)


def test_boundary_conventions():
    n = 6
    np.testing.assert_array_equal(cdf_kth_highest(0, n, U, V), 0.0)
    np.testing.assert_array_equal(pdf_kth_highest(0, n, U, V), 0.0)
    np.testing.assert_array_equal(cdf_kth_highest(n + 1, n, U, V), 1.0)
    for k in range(1, n + 1):
        assert float(cdf_kth_highest(k, n, U, 1.0)) == pytest.approx(1.0)


def test_nonuniform_distribution_consistency():
    x = np.linspace(0.0, 1.0, 6)
    dist = ValuationDistribution.tabulated(x, 0.5 + x)
    for n, k in [(4, 1), (4, 3), (7, 5)]:
        for v in (0.13, 0.5, 0.92):
            area, _ = integrate.quad(lambda t: float(pdf_kth_highest(k, n, dist, t)), 0, v, epsabs=1e-13, limit=200)
            assert float(cdf_kth_highest(k, n, dist, v)) == pytest.approx(area, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 30), st.data(), st.floats(0.0, 1.0))
def test_stochastic_ordering(n, data, v):
    k = data.draw(st.integers(2, n + 1))
    hi = float(cdf_kth_highest(k - 1, n, U, v))
    lo = float(cdf_kth_highest(k, n, U, v))
    assert lo >= hi - 1e-15


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30), st.data())
def test_cdf_nondecreasing(n, data):
    k = data.draw(st.integers(1, n))
    c = cdf_kth_highest(k, n, U, V)
    assert np.all(np.diff(c) >= -1e-15)


def test_binomial_paths_agree():
    for n in range(0, 64):
        for r in range(n + 1):
            assert binom(n, r) == pytest.approx(math.comb(n, r), rel=1e-12)
    with pytest.raises(ValueError):
        binom(65, 3)


def test_query_bounds():
    with pytest.raises(ValueError):
        OrderStatQuery(0, 3, U)
    q = OrderStatQuery(2, 5, U)
    assert float(q.cdf(0.5)) == pytest.approx(0.1875)


def test_exact_table_is_pascal():
    for n in range(1, orderstats.EXACT_MAX_N + 1):
        row = orderstats._BINOM_TABLE[n]
        assert row == [orderstats._BINOM_TABLE[n - 1][r - 1] * (r > 0) + (orderstats._BINOM_TABLE[n - 1][r] if r < n else 0)
                       for r in range(n + 1)]
