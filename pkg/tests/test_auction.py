import math
import warnings
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cdc_incent import auction
from cdc_incent.model import CostModel, RewardSchedule, ValuationDistribution

U = ValuationDistribution.uniform()
TABLE3 = CostModel()
UNIT = CostModel.normalized()


def wta(sigma=1.0):
    return auction.make_reward_schedule("winner_take_all", 1, sigma)


# ---------------------------------------------------------------- cost


def test_bid_cost_examples():
    assert auction.bid_cost(0.0, TABLE3) == 0.0
    assert auction.bid_cost(1000.0, TABLE3) == pytest.approx(5e-10, rel=1e-15)
    assert auction.bid_cost(2000.0, TABLE3) == pytest.approx(4 * auction.bid_cost(1000.0, TABLE3))


def test_inverse_cost_examples():
    assert auction.inverse_cost(0.0, TABLE3) == 0.0
    assert auction.inverse_cost(5e-10, TABLE3) == pytest.approx(1000.0, rel=1e-12)


def test_inverse_cost_round_trip():
    for tau in np.random.default_rng(5).uniform(0, 1e4, 50):
        assert auction.inverse_cost(auction.bid_cost(tau, TABLE3), TABLE3) == pytest.approx(tau, rel=1e-9)


def test_inverse_cost_custom_function():
    f = lambda t: t**3 + t
    assert auction.inverse_cost(10.0, TABLE3, cost_fn=f, tau_max=5.0) == pytest.approx(2.0, rel=1e-9)
    with pytest.raises(ValueError):
        auction.inverse_cost(1e6, TABLE3, cost_fn=f, tau_max=5.0)
    with pytest.raises(ValueError):
        auction.inverse_cost(-1.0, TABLE3)


# ------------------------------------------------------------- rewards


def test_reward_schedules():
    assert auction.make_reward_schedule("homogeneous", 4, 1.0).rewards == (0.25,) * 4
    np.testing.assert_allclose(auction.make_reward_schedule("arithmetic", 4, 1.0, 0.05).rewards,
                               [0.325, 0.275, 0.225, 0.175], atol=1e-15)
    g = auction.make_reward_schedule("geometric", 4, 1.0, 0.8).rewards
    assert g[0] == pytest.approx(1 / (1 + 0.8 + 0.64 + 0.512), rel=1e-14)
    np.testing.assert_allclose(np.array(g[1:]) / np.array(g[:-1]), 0.8)
    assert wta(2.0).rewards == (2.0,)


@pytest.mark.parametrize("kind, K, param", [("arithmetic", 5, 0.5), ("geometric", 3, 1.5), ("bogus", 2, None)])
def test_bad_schedules(kind, K, param):
    with pytest.raises(ValueError):
        auction.make_reward_schedule(kind, K, 1.0, param)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["homogeneous", "arithmetic", "geometric"]), st.integers(1, 8), st.floats(0.1, 10))
def test_schedules_are_valid(kind, K, sigma):
    param = {"arithmetic": sigma / (K * K * 2), "geometric": 0.7}.get(kind)
    assert auction.make_reward_schedule(kind, K, sigma, param).violations() == []


# --------------------------------------------------------- equilibrium


def test_score_integral_closed_forms():
    assert auction.score_integral(0.0, 1, 5, U) == 0.0
    assert auction.score_integral(1.0, 1, 5, U) == pytest.approx(0.8, abs=1e-12)
    assert auction.score_integral(1.0, 2, 5, U) == pytest.approx(0.6, abs=1e-12)
    v = 0.7
    assert auction.score_integral(v, 2, 5, U) == pytest.approx(3 * v**4 - 2.4 * v**5, abs=1e-12)


def test_winner_take_all_closed_form():
    table = auction.tabulate_bid(wta(), 5, U, UNIT)
    exact = np.sqrt(0.8 * table.grid**5)
    np.testing.assert_allclose(table.bids, exact, rtol=1e-6, atol=0)
    assert table(1.0) == pytest.approx(0.894427191, rel=1e-9)
    v = np.random.default_rng(0).random(200)
    # between nodes the first panels cannot follow v**5 in relative terms
    np.testing.assert_allclose(table(v), np.sqrt(0.8 * v**5), rtol=1e-6, atol=5e-8)
    assert auction.equilibrium_bid(0.6, wta(), 5, U, UNIT) == pytest.approx(math.sqrt(0.8 * 0.6**5), rel=1e-9)


def test_bid_is_zero_at_bottom_and_increasing():
    for rewards in (wta(), auction.make_reward_schedule("arithmetic", 4, 1.0, 0.05)):
        table = auction.tabulate_bid(rewards, 10, U, TABLE3)
        assert table.bids[0] == 0.0
        assert np.all(np.diff(table.bids) > 0)


def test_direct_and_tabulated_agree():
    rewards = auction.make_reward_schedule("geometric", 4, 1.0, 0.8)
    fast = auction.tabulate_bid(rewards, 7, U, UNIT)
    slow = auction.tabulate_bid(rewards, 7, U, UNIT, direct=True)
    np.testing.assert_allclose(fast.bids, slow.bids, rtol=1e-7, atol=1e-9)
    for v in (0.05, 0.33, 0.9):
        assert fast(v) == pytest.approx(auction.equilibrium_bid(v, rewards, 7, U, UNIT), rel=1e-6)


def test_padding_with_zero_rewards_is_neutral():
    base = RewardSchedule((0.6, 0.4), 1.0)
    padded = RewardSchedule((0.6, 0.4, 0.0, 0.0), 1.0)
    a = auction.tabulate_bid(base, 6, U, UNIT)
    b = auction.tabulate_bid(padded, 6, U, UNIT)
    np.testing.assert_allclose(a.bids, b.bids, rtol=0, atol=1e-12)


@pytest.mark.parametrize("lam", [0.25, 3.0, 40.0])
def test_scaling_rewards_scales_bids_by_root(lam):
    rewards = auction.make_reward_schedule("arithmetic", 3, 1.0, 0.1)
    a = auction.tabulate_bid(rewards, 6, U, UNIT)
    b = auction.tabulate_bid(rewards.scaled(lam), 6, U, UNIT)
    np.testing.assert_allclose(b.score, lam * a.score, rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(b.bids, math.sqrt(lam) * a.bids, rtol=1e-12)


def test_nonuniform_valuations():
    x = np.linspace(0, 1, 9)
    dist = ValuationDistribution.tabulated(x, 2 - x)
    rewards = auction.make_reward_schedule("homogeneous", 3, 1.0)
    table = auction.tabulate_bid(rewards, 6, dist, UNIT)
    assert np.all(np.diff(table.bids) > 0)
    assert table(0.42) == pytest.approx(auction.equilibrium_bid(0.42, rewards, 6, dist, UNIT), rel=1e-6)


def test_inverse_round_trip():
    table = auction.tabulate_bid(auction.make_reward_schedule("homogeneous", 2, 1.0), 4, U, TABLE3)
    v = np.linspace(0.01, 1, 50)
    np.testing.assert_allclose(table.inverse(table(v)), v, atol=1e-9)
    with pytest.raises(ValueError):
        table.inverse(2 * table.max_bid)


def test_more_rewards_than_bidders_warns():
    with pytest.warns(UserWarning, match="exceed"):
        auction._differences(auction.make_reward_schedule("homogeneous", 6, 1.0), 4)


# ------------------------------------------------------------ utilities


def test_bottom_bidder_utility():
    rewards = auction.make_reward_schedule("homogeneous", 4, 1.0)
    assert auction.bidder_expected_utility(0.0, rewards, 5, U, TABLE3, 0.0) == pytest.approx(-TABLE3.fixed)
    assert auction.bidder_expected_utility(0.0, rewards, 5, U, CostModel(comm_energy=0.0), 0.0) == 0.0


def test_everyone_rewarded_when_k_equals_i():
    I = 4
    rewards = auction.make_reward_schedule("homogeneous", I, 1.0)
    cost = CostModel.normalized()
    table = auction.tabulate_bid(rewards, I, U, cost)
    for v in (0.1, 0.5, 0.9):
        assert auction.bidder_expected_utility(v, rewards, I, U, cost, 0.0, table) == pytest.approx(v / I)


@pytest.mark.parametrize(
    "rewards",
    [wta(), auction.make_reward_schedule("arithmetic", 4, 1.0, 0.05), auction.make_reward_schedule("geometric", 3, 1.0, 0.8)],
    ids=["winner_take_all", "arithmetic", "geometric"],
)
def test_equilibrium_bid_is_best_response(rewards):
    I = 6
    table = auction.tabulate_bid(rewards, I, U, TABLE3)
    taus = np.linspace(0, table.max_bid, 10_000)
    for v in np.random.default_rng(17).random(10):
        eq = auction.bidder_expected_utility(v, rewards, I, U, TABLE3, table(v), table)
        best = np.max(auction.bidder_expected_utility(v, rewards, I, U, TABLE3, taus, table))
        assert eq >= best - 1e-9


def test_formula_and_monte_carlo_agree_when_everyone_is_rewarded():
    rewards = auction.make_reward_schedule("arithmetic", 5, 1.0, 0.05)
    f = auction.master_expected_utility(rewards, 5, U, UNIT)
    mc = auction.master_expected_utility(rewards, 5, U, UNIT, method="mc", rounds=100_000, seed=3)
    assert abs(f.value - mc.value) <= 3 * mc.stderr


def test_formula_overstates_top_k_when_k_below_i():
    rewards = auction.make_reward_schedule("homogeneous", 2, 1.0)
    f = auction.master_expected_utility(rewards, 6, U, UNIT)
    mc = auction.master_expected_utility(rewards, 6, U, UNIT, method="mc", rounds=50_000, seed=1)
    assert mc.value > f.value + 10 * mc.stderr  # top-2 bids are above two average bids


def test_zero_rewards_elicit_nothing():
    rewards = RewardSchedule((0.0,), 0.0)
    table = auction.tabulate_bid(rewards, 5, U, TABLE3)
    assert np.all(table.bids == 0)
    assert auction.master_expected_utility(rewards, 5, U, TABLE3).value == 0.0


def test_formula_value_grows_with_sigma():
    gross = []
    for sigma in (0.5, 1.0, 2.0):
        r = auction.make_reward_schedule("arithmetic", 4, sigma, 0.05 * sigma)
        gross.append(auction.master_expected_utility(r, 10, U, TABLE3).value + sigma)
    assert gross[0] <= gross[1] <= gross[2]


@pytest.mark.parametrize("I", [5, 10, 15])
def test_single_reward_is_not_optimal(I):
    single, multi, gap = auction.winner_take_all_gap(I, U, TABLE3, 1.0, auction.make_reward_schedule("homogeneous", 4, 1.0))
    assert gap == pytest.approx(multi - single) and gap > 0


def test_gap_not_applicable_for_linear_cost():
    cost = CostModel(shape="linear")
    _, _, gap = auction.winner_take_all_gap(5, U, cost, 1.0, auction.make_reward_schedule("homogeneous", 4, 1.0))
    assert gap is None


# -------------------------------------------------------------- auction


def test_equal_valuations_give_uniform_rank_permutations():
    rewards = auction.make_reward_schedule("homogeneous", 2, 1.0)
    counts = Counter()
    rng = np.random.default_rng(99)
    for _ in range(10_000):
        out = auction.run_auction([0.5, 0.5, 0.5], rewards, 3, U, TABLE3, rng)
        counts[tuple(o.rank for o in out)] += 1
    assert len(counts) == 6
    assert stats.chisquare(list(counts.values())).pvalue > 0.01


def test_ranking_follows_valuations():
    rewards = auction.make_reward_schedule("arithmetic", 3, 1.0, 0.1)
    vals = [0.3, 0.9, 0.1, 0.5, 0.7]
    out = auction.run_auction(vals, rewards, 5, U, TABLE3, np.random.default_rng(0))
    assert [o.rank for o in out] == [4, 1, 5, 3, 2]
    assert [o.reward for o in out] == pytest.approx([0, rewards.rewards[0], 0, rewards.rewards[2], rewards.rewards[1]])
    loser = out[2]
    assert loser.utility == pytest.approx(-auction.bid_cost(loser.bid, TABLE3) - TABLE3.fixed)


def test_everyone_wins_when_k_equals_i():
    rewards = auction.make_reward_schedule("geometric", 4, 1.0, 0.5)
    out = auction.run_auction([0.2, 0.4, 0.6, 0.8], rewards, 4, U, TABLE3, np.random.default_rng(0))
    assert all(o.reward > 0 for o in out)


def test_comm_cost_on_loss_flag():
    rewards = wta()
    out = auction.settle([0.1, 0.9], [0.0, 1.0], rewards, TABLE3, np.random.default_rng(0), False)
    assert out[0].utility == 0.0


def test_wrong_valuation_count():
    with pytest.raises(ValueError):
        auction.run_auction([0.1], wta(), 3, U, TABLE3, np.random.default_rng(0))


def test_curves_csv(tmp_path):
    path = tmp_path / "curves.csv"
    auction.write_curves(path, [(0.5, 1234.56789012, "homogeneous", 4, 10)])
    assert path.read_text().splitlines() == ["valuation,bid_watts,schedule_kind,K,I", "0.5,1234.56789,homogeneous,4,10"]
