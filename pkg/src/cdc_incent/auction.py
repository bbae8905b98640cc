"""All-pay auction among cluster heads: equilibrium bids, utilities, reward design.

The bid of a cluster head is the CPU power it commits. Only the
bid-dependent energy cost ``coefficient * tau**2`` is inverted to obtain the
equilibrium bid; the fixed communication cost ``theta_c * c`` enters realised
and expected utilities as a participation constant.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .model import CostModel, RewardSchedule, RewardSpec, ValuationDistribution
from .orderstats import cdf_kth_highest, density_coefficient, pdf_kth_highest
from .quadrature import QuadratureError, adaptive_simpson, bisect

DEFAULT_GRID = 512
DEFAULT_TOL = 1e-10
MAX_DEPTH = 40
FORMULA = "formula"
MONTE_CARLO = "mc"


# --------------------------------------------------------------------- cost


def bid_cost(tau, cost: CostModel):
    """Energy cost of committing `tau` Watts, excluding the fixed communication term."""
    tau = np.asarray(tau, dtype=float)
    if cost.shape == "linear":
        out = cost.coefficient * tau
    else:
        out = cost.coefficient * tau * tau
    return out if out.ndim else float(out)


def inverse_cost(
    y,
    cost: CostModel,
    cost_fn: Callable[[float], float] | None = None,
    tau_max: float | None = None,
    rtol: float = 1e-10,
):
    """Bid whose cost is `y`.

    Closed form for the built-in shapes. With `cost_fn` (any increasing convex
    cost with ``cost_fn(0) == 0``) the root is found by bisection on
    ``[0, tau_max]``.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0):
        raise ValueError("inverse_cost: cost must be >= 0")
    if cost_fn is not None:
        if tau_max is None:
            raise ValueError("inverse_cost: tau_max is required with a custom cost function")
        if cost_fn(tau_max) < float(np.max(y_arr)):
            raise ValueError(f"inverse_cost: tau_max={tau_max:g} does not bracket the root")
        flat = [0.0 if yy == 0 else bisect(lambda t, yy=yy: cost_fn(t) - yy, 0.0, tau_max, rtol) for yy in y_arr.ravel()]
        out = np.asarray(flat).reshape(y_arr.shape)
    elif cost.shape == "linear":
        out = y_arr / cost.coefficient
    else:
        out = np.sqrt(y_arr / cost.coefficient)
    return out if out.ndim else float(out)


# ---------------------------------------------------------- rewards


def make_reward_schedule(kind: str, K: int, sigma: float, param: float | None = None) -> RewardSchedule:
    """Reward vector M_1 >= ... >= M_K summing to sigma.

    kind: homogeneous, arithmetic (param = gap gamma), geometric (param =
    ratio eta) or winner_take_all (K is ignored and forced to one).
    """
    if K < 1:
        raise ValueError("reward schedule needs K >= 1")
    if not sigma > 0:
        raise ValueError("reward schedule needs sigma > 0")
    if kind == "homogeneous":
        m = [sigma / K] * K
    elif kind == "arithmetic":
        if param is None or not param > 0:
            raise ValueError("arithmetic rewards need gamma > 0")
        first = (sigma + param * K * (K - 1) / 2.0) / K
        m = [first - k * param for k in range(K)]
    elif kind == "geometric":
        if param is None or not 0 <= param <= 1:
            raise ValueError("geometric rewards need 0 <= eta <= 1")
        if param == 1:
            m = [sigma / K] * K
        else:
            first = sigma * (1.0 - param) / (1.0 - param**K)
            m = [first * param**k for k in range(K)]
    elif kind == "winner_take_all":
        m = [sigma]
    else:
        raise ValueError(f"unknown reward kind {kind!r}")
    if any(not x > 0 for x in m):
        raise ValueError(f"{kind} rewards with K={K}, param={param} make some M_k <= 0")
    return RewardSchedule(tuple(m), float(sigma))


def schedule_from_spec(spec: RewardSpec) -> RewardSchedule:
    if spec.kind == "explicit":
        return RewardSchedule(tuple(float(x) for x in spec.values), float(spec.sigma))
    return make_reward_schedule(spec.kind, spec.K, spec.sigma, spec.param)


def _differences(rewards: RewardSchedule, I: int) -> np.ndarray:
    """M_k - M_{k+1} for k = 1..I-1 with rewards zero-padded to length I."""
    if rewards.K > I:
        warnings.warn(f"K={rewards.K} rewards exceed I={I} bidders; M_k beyond k=I are ignored", stacklevel=3)
    m = rewards.padded(I)
    return m[:-1] - m[1:]


# -------------------------------------------------------- equilibrium


def score_integral(v: float, k: int, I: int, dist: ValuationDistribution, tol: float = DEFAULT_TOL) -> float:
    """Integral of t * f_{k:I-1}(t) from the bottom of the support to `v`."""
    if not 1 <= k <= I - 1:
        raise ValueError(f"rank k={k} out of range for I={I}")
    if not dist.lo <= v <= dist.hi:
        raise ValueError(f"valuation {v} outside the support")
    return adaptive_simpson(lambda t: t * float(pdf_kth_highest(k, I - 1, dist, t)), dist.lo, v, tol, MAX_DEPTH)


def equilibrium_bid(
    v: float,
    rewards: RewardSchedule,
    I: int,
    dist: ValuationDistribution,
    cost: CostModel,
    tol: float = DEFAULT_TOL,
) -> float:
    """Symmetric equilibrium bid at valuation `v`, by direct quadrature (no table)."""
    diffs = _differences(rewards, I)
    y = math.fsum(dk * score_integral(v, k, I, dist, tol) for k, dk in enumerate(diffs, start=1) if dk != 0)
    return inverse_cost(max(y, 0.0), cost)


def _score_coefficients(rewards: RewardSchedule, I: int) -> np.ndarray:
    n = I - 1
    diffs = _differences(rewards, I)
    return np.array([diffs[k - 1] * density_coefficient(k, n) for k in range(1, n + 1)], dtype=float)


@dataclass(frozen=True, eq=False)
class EquilibriumBid:
    """Equilibrium bid function tabulated on a valuation grid.

    ``score`` holds the equilibrium cost c(beta(v)) at the grid points and
    ``slope`` its exact derivative. Between grid points the cost is a
    monotone cubic Hermite interpolant, and beta = c^{-1}(cost); this keeps
    the tabulated strategy a best response to itself to well below 1e-9.
    """

    grid: np.ndarray
    score: np.ndarray
    slope: np.ndarray
    bids: np.ndarray
    cost: CostModel
    rewards: RewardSchedule
    n_bidders: int
    dist: ValuationDistribution

    @property
    def v_lo(self) -> float:
        return float(self.grid[0])

    @property
    def v_hi(self) -> float:
        return float(self.grid[-1])

    @property
    def max_bid(self) -> float:
        return float(self.bids[-1])

    def cost_at(self, v):
        """Interpolated equilibrium cost c(beta(v))."""
        v = np.asarray(v, dtype=float)
        x = self.grid
        i = np.clip(np.searchsorted(x, v, side="right") - 1, 0, len(x) - 2)
        h = x[i + 1] - x[i]
        u = np.clip((v - x[i]) / h, 0.0, 1.0)
        u2, u3 = u * u, u * u * u
        y = (
            (2 * u3 - 3 * u2 + 1) * self.score[i]
            + (u3 - 2 * u2 + u) * h * self._m_left[i]
            + (-2 * u3 + 3 * u2) * self.score[i + 1]
            + (u3 - u2) * h * self._m_right[i]
        )
        return np.maximum(y, 0.0)

    def __call__(self, v):
        out = inverse_cost(self.cost_at(v), self.cost)
        return out

    def inverse(self, tau):
        """Smallest valuation whose equilibrium bid reaches `tau`."""
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < 0) or np.any(tau > self.max_bid * (1 + 1e-12)):
            raise ValueError(f"bid outside [0, {self.max_bid:.9g}]")
        y = np.minimum(np.asarray(bid_cost(tau, self.cost), dtype=float), self.score[-1])
        x = self.grid
        i = np.clip(np.searchsorted(self.score, y, side="left") - 1, 0, len(x) - 2)
        lo, hi = x[i].copy(), x[i + 1].copy()
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = self.cost_at(mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = np.where(y <= self.score[i], x[i], hi)
        return out if out.ndim else float(out)

    def __post_init__(self):
        # Fritsch-Carlson limiting on the exact end slopes of each panel
        h = np.diff(self.grid)
        delta = np.diff(self.score) / h
        ml = self.slope[:-1].copy()
        mr = self.slope[1:].copy()
        flat = delta <= 0
        ml[flat] = 0.0
        mr[flat] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(flat, 0.0, ml / delta)
            b = np.where(flat, 0.0, mr / delta)
        r = a * a + b * b
        over = r > 9.0
        if np.any(over):
            t = 3.0 / np.sqrt(r[over])
            ml[over] *= t
            mr[over] *= t
        object.__setattr__(self, "_m_left", ml)
        object.__setattr__(self, "_m_right", mr)


def tabulate_bid(
    rewards: RewardSchedule,
    I: int,
    dist: ValuationDistribution,
    cost: CostModel,
    grid_size: int = DEFAULT_GRID,
    tol: float = DEFAULT_TOL,
    direct: bool = False,
) -> EquilibriumBid:
    """Equilibrium bid table for one (rewards, I, dist, cost) tuple (memoised).

    ``direct=True`` computes every grid value by its own quadrature from the
    bottom of the support instead of accumulating panel integrals.
    """
    return _tabulate(rewards, I, dist, cost, grid_size, tol, direct)


@lru_cache(maxsize=256)
def _tabulate(rewards, I, dist, cost, grid_size, tol, direct) -> EquilibriumBid:
    if grid_size < 256:
        raise ValueError("bid grid needs at least 256 points")
    grid = np.linspace(dist.lo, dist.hi, grid_size)
    if I < 2:
        zeros = np.zeros(grid_size)
        return EquilibriumBid(grid, zeros, zeros.copy(), zeros.copy(), cost, rewards, I, dist)
    coef = _score_coefficients(rewards, I)
    x, d, c = dist.knots()
    if direct:
        diffs = _differences(rewards, I)

        def integrand(t):
            return t * math.fsum(
                dk * float(pdf_kth_highest(k, I - 1, dist, t)) for k, dk in enumerate(diffs, start=1) if dk != 0
            )

        score = np.array([adaptive_simpson(integrand, dist.lo, v, tol, MAX_DEPTH) for v in grid])
    else:
        inc, status = kernels.score_increments(grid, x, d, c, coef, tol, MAX_DEPTH)
        if status == kernels.FAIL_DEPTH:
            raise QuadratureError("equilibrium tabulation: adaptive Simpson hit the depth limit")
        score = np.concatenate(([0.0], np.cumsum(inc)))
    score = np.maximum.accumulate(np.maximum(score, 0.0))
    slope = np.maximum(kernels.score_density(grid, x, d, c, coef), 0.0)
    bids = np.asarray(inverse_cost(score, cost), dtype=float)
    for arr in (grid, score, slope, bids):
        arr.setflags(write=False)
    return EquilibriumBid(grid, score, slope, bids, cost, rewards, I, dist)


# ------------------------------------------------------------ utilities


def win_probabilities(vhat, I: int, dist: ValuationDistribution) -> np.ndarray:
    """P(rank k) for k = 1..I when the other I-1 valuations are below/above `vhat`."""
    n = I - 1
    cdfs = [cdf_kth_highest(k, n, dist, vhat) for k in range(0, I + 1)]
    return np.stack([cdfs[k] - cdfs[k - 1] for k in range(1, I + 1)], axis=-1)


def bidder_expected_utility(
    v: float,
    rewards: RewardSchedule,
    I: int,
    dist: ValuationDistribution,
    cost: CostModel,
    tau,
    table: EquilibriumBid | None = None,
):
    """Expected utility of bidding `tau` with valuation `v` against equilibrium opponents.

    The bid is mapped to the valuation that would produce it in equilibrium,
    which fixes the rank probabilities.
    """
    if table is None:
        table = tabulate_bid(rewards, I, dist, cost)
    vhat = table.inverse(tau)
    m = rewards.padded(I)
    gain = v * (win_probabilities(vhat, I, dist) @ m)
    out = gain - np.asarray(bid_cost(tau, cost)) - cost.fixed
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class MasterUtility:
    value: float
    stderr: float = 0.0
    method: str = FORMULA


def _expected_bid(table: EquilibriumBid, dist: ValuationDistribution, nodes: int = 8) -> float:
    """Integral of beta(v) dF(v), Gauss-Legendre on every grid panel."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    a, b = table.grid[:-1, None], table.grid[1:, None]
    v = 0.5 * (b - a) * t + 0.5 * (a + b)
    vals = np.asarray(table(v.ravel())).reshape(v.shape) * dist.pdf(v)
    return float(np.sum(0.5 * (b - a) * (vals @ w[:, None])))


def master_expected_utility(
    rewards: RewardSchedule,
    I: int,
    dist: ValuationDistribution,
    cost: CostModel,
    K: int | None = None,
    phi: float = 1.0,
    method: str = FORMULA,
    rounds: int = 10_000,
    seed: int = 0,
    table: EquilibriumBid | None = None,
) -> MasterUtility:
    """Master's expected utility phi * (elicited CPU power) - sigma.

    FORMULA uses K * E[beta(v)], the closed expression; it coincides with the
    expected top-K bid total only when K == I. MONTE_CARLO samples
    valuation profiles and sums the K highest equilibrium bids.
    """
    K = rewards.K if K is None else K
    if table is None:
        table = tabulate_bid(rewards, I, dist, cost)
    if method == FORMULA:
        return MasterUtility(phi * K * _expected_bid(table, dist) - rewards.sigma, 0.0, FORMULA)
    if method != MONTE_CARLO:
        raise ValueError(f"unknown method {method!r}")
    if rounds < 1:
        raise ValueError("Monte Carlo needs at least one round")
    rng = np.random.default_rng(seed)
    vals = dist.sample(rng, (rounds, I))
    bids = np.sort(np.asarray(table(vals.ravel())).reshape(rounds, I), axis=1)[:, ::-1]
    per_round = phi * bids[:, : min(K, I)].sum(axis=1) - rewards.sigma
    se = float(per_round.std(ddof=1) / math.sqrt(rounds)) if rounds > 1 else 0.0
    return MasterUtility(float(per_round.mean()), se, MONTE_CARLO)


def winner_take_all_gap(
    I: int,
    dist: ValuationDistribution,
    cost: CostModel,
    sigma: float,
    comparison: RewardSchedule,
    phi: float = 1.0,
    grid_size: int = DEFAULT_GRID,
    tol: float = DEFAULT_TOL,
) -> tuple[float, float, float | None]:
    """(single-reward utility, comparison utility, comparison - single).

    The gap is None (not applicable) unless the cost is strictly convex.
    """
    if comparison.K < 2:
        raise ValueError("comparison schedule needs K >= 2")
    single = make_reward_schedule("winner_take_all", 1, sigma)
    t1 = tabulate_bid(single, I, dist, cost, grid_size, tol)
    t2 = tabulate_bid(comparison, I, dist, cost, grid_size, tol)
    p1 = master_expected_utility(single, I, dist, cost, phi=phi, table=t1).value
    p2 = master_expected_utility(comparison, I, dist, cost, phi=phi, table=t2).value
    gap = p2 - p1 if cost.shape == "quadratic" else None
    return p1, p2, gap


# ------------------------------------------------------------- auction


@dataclass(frozen=True)
class BidderOutcome:
    index: int
    valuation: float
    bid: float
    rank: int
    reward: float
    utility: float


def rank_bids(bids: Sequence[float], rng: np.random.Generator) -> np.ndarray:
    """Rank (1 = highest) of each bid; exact ties are broken by a random permutation."""
    bids = np.asarray(bids, dtype=float)
    tiebreak = rng.permutation(len(bids))
    order = np.lexsort((tiebreak, -bids))
    ranks = np.empty(len(bids), dtype=int)
    ranks[order] = np.arange(1, len(bids) + 1)
    return ranks


def settle(
    valuations: Sequence[float],
    bids: Sequence[float],
    rewards: RewardSchedule,
    cost: CostModel,
    rng: np.random.Generator,
    include_comm_cost_on_loss: bool = True,
) -> list[BidderOutcome]:
    """Rank the bids, pay M_1..M_K to the top K and compute realised utilities."""
    ranks = rank_bids(bids, rng)
    out = []
    for i, (v, b, r) in enumerate(zip(valuations, bids, ranks)):
        reward = rewards.rewards[r - 1] if r <= rewards.K else 0.0
        spent = float(bid_cost(b, cost))
        if r <= rewards.K:
            util = v * reward - spent - cost.fixed
        else:
            util = -spent - (cost.fixed if include_comm_cost_on_loss else 0.0)
        out.append(BidderOutcome(i, float(v), float(b), int(r), float(reward), float(util)))
    return out


def run_auction(
    valuations: Sequence[float],
    rewards: RewardSchedule,
    I: int,
    dist: ValuationDistribution,
    cost: CostModel,
    rng: np.random.Generator,
    table: EquilibriumBid | None = None,
    include_comm_cost_on_loss: bool = True,
) -> list[BidderOutcome]:
    if len(valuations) != I:
        raise ValueError(f"expected {I} valuations, got {len(valuations)}")
    if table is None:
        table = tabulate_bid(rewards, I, dist, cost)
    bids = np.asarray(table(np.asarray(valuations, dtype=float)), dtype=float)
    return settle(valuations, bids, rewards, cost, rng, include_comm_cost_on_loss)


def write_curves(path, rows: Sequence[tuple]) -> None:
    """CSV of (valuation, bid_watts, schedule_kind, K, I) rows."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["valuation", "bid_watts", "schedule_kind", "K", "I"])
        for v, b, kind, K, I in rows:
            out.writerow([f"{v:.9g}", f"{b:.9g}", kind, K, I])
