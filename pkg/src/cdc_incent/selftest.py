"""Embedded oracle checks run by ``cdc-incent selftest``."""
from __future__ import annotations

import itertools
import sys

import numpy as np

from . import auction, polycode
from .model import CostModel, ValuationDistribution
from .orderstats import cdf_kth_highest, pdf_kth_highest
from .quadrature import adaptive_simpson


def check_orderstats() -> str | None:
    dist = ValuationDistribution.uniform()
    grid = np.linspace(0.0, 1.0, 11)
    for n in range(1, 8):
        for k in range(1, n + 1):
            for v in grid:
                area = adaptive_simpson(lambda t: float(pdf_kth_highest(k, n, dist, t)), 0.0, v, 1e-12)
                got = float(cdf_kth_highest(k, n, dist, v))
                if abs(got - area) > 1e-7:
                    return f"k={k} n={n} v={v:.2f}: cdf={got:.10f} but integral of pdf={area:.10f}"
    return None


def check_bid_roundtrip() -> str | None:
    cost = CostModel()
    rng = np.random.default_rng(12345)
    for tau in rng.uniform(0.0, 5000.0, 50):
        back = auction.inverse_cost(auction.bid_cost(tau, cost), cost)
        if abs(back - tau) > 1e-9 * tau:
            return f"tau={tau:.6g} came back as {back:.12g}"
    table = auction.tabulate_bid(
        auction.make_reward_schedule("winner_take_all", 1, 1.0), 5, ValuationDistribution.uniform(), CostModel.normalized()
    )
    exact = np.sqrt(0.8 * table.grid**5)
    rel = np.abs(table.bids - exact) / np.where(exact > 0, exact, 1.0)
    if rel.max() > 1e-6:
        return f"winner-take-all bid deviates from sqrt(0.8 v^5) by {rel.max():.3g}"
    return None


def check_decode_subsets() -> str | None:
    field = polycode.PrimeField()
    rng = np.random.default_rng(2718)
    A = field.random_matrix(rng, (4, 4))
    B = field.random_matrix(rng, (4, 4))
    task = polycode.encode(A, B, 2, 2, range(1, 7), field)
    results = [polycode.local_compute(s, field) for s in task.shares]
    want = polycode.plain_product(A, B, field)
    for subset in itertools.combinations(results, 4):
        if not np.array_equal(polycode.decode(list(subset), 2, 2, field), want):
            return f"subset {[r.head_id for r in subset]} decoded incorrectly"
    return None


def check_single_reward_gap() -> str | None:
    dist = ValuationDistribution.uniform()
    homogeneous = auction.make_reward_schedule("homogeneous", 4, 1.0)
    for I in (5, 10):
        single, multi, gap = auction.winner_take_all_gap(I, dist, CostModel(), 1.0, homogeneous)
        if gap is None or not gap > 0:
            return f"I={I}: single reward {single:.6g} is not beaten by four homogeneous rewards {multi:.6g}"
    return None


CHECKS = (
    ("orderstats cdf matches integral of pdf", check_orderstats),
    ("bid cost round trip and closed-form equilibrium", check_bid_roundtrip),
    ("polynomial code decodes from every 4-of-6 subset", check_decode_subsets),
    ("single reward is beaten by multiple rewards", check_single_reward_gap),
)


def run_selftest(out=None) -> bool:
    out = sys.stdout if out is None else out
    ok = True
    for name, fn in CHECKS:
        try:
            problem = fn()
        except Exception as exc:  # a crash is a failed check, not an aborted report
            problem = f"{type(exc).__name__}: {exc}"
        if problem is None:
            print(f"PASS  {name}", file=out)
        else:
            ok = False
            print(f"FAIL  {name}: {problem}", file=out)
    return ok
