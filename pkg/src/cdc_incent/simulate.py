"""End-to-end rounds: coalitions -> valuations -> bids -> ranking -> coded execution."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import auction, hedonic, polycode
from .model import Partition, RewardSchedule, ScenarioConfig

log = logging.getLogger(__name__)

COALITION_AUCTION = "coalition_auction"
COALITION_RANDOM = "coalition_random"
NO_COALITION_RANDOM = "no_coalition_random"
SCHEMES = (COALITION_AUCTION, COALITION_RANDOM, NO_COALITION_RANDOM)
SWEEP_AXES = ("n_heads", "K", "reward_kind", "gamma", "eta")

# independent random streams inside one round
_PARTITION, _VALUATION, _BIDS, _TIES, _LATENCY, _MATRICES = range(6)


@dataclass(frozen=True)
class RunResult:
    round: int
    scheme: str
    head_ids: tuple[str, ...]
    partition: Partition
    coalition_values: tuple[float, ...]
    valuations: tuple[float, ...]
    bids: tuple[float, ...]
    ranks: tuple[int, ...]
    rewards_paid: tuple[float, ...]
    completion_times: tuple[float, ...]
    fastest: tuple[str, ...]
    decode_ok: bool
    decode_checked: bool
    total_allocated_cpu: float
    master_utility_formula: float
    master_utility_realized: float
    clamped: int


def round_seed(seed: int, index: int) -> int:
    return (int(seed) ^ int(index)) & (2**64 - 1)


def _stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng([seed, purpose])


def completion_times(bids, cycles: float, latency, rng: np.random.Generator) -> np.ndarray:
    """cycles / tau per head (inf for a zero bid), plus exponential jitter when stochastic."""
    bids = np.asarray(bids, dtype=float)
    with np.errstate(divide="ignore"):
        base = np.where(bids > 0, cycles / np.where(bids > 0, bids, 1.0), math.inf)
    if latency.kind == "shifted_exponential":
        base = base + rng.exponential(1.0 / latency.jitter_rate, size=len(bids))
    return base


def _partition(config: ScenarioConfig, seed: int, coalitions: bool) -> Partition:
    head_ids = [h.id for h in config.heads]
    if not coalitions:
        return Partition.empty(head_ids)
    initial = config.initial_partition or _stream(seed, _PARTITION)
    partition, _ = hedonic.form_coalitions(config.workers, config.heads, initial)
    return partition


def run_round(
    config: ScenarioConfig,
    scheme: str,
    index: int = 0,
    seed: int | None = None,
    verify_every: int = 10,
) -> RunResult:
    """One round of the two-level pipeline under `scheme`.

    No-coalition schemes leave workers idle; heads then own only their own
    CPU power. Bids are clamped to the coalition's total power.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    seed = config.rng_seed if seed is None else seed
    if seed is None:
        raise ValueError("a seed is required")
    rs = round_seed(seed, index)
    heads = sorted(config.heads, key=lambda h: h.id)
    head_ids = tuple(h.id for h in heads)
    I = len(heads)
    mn = polycode.recovery_threshold(config.code.m, config.code.n)
    if I < mn:
        raise polycode.DecodeError(f"{I} cluster heads cannot meet the recovery threshold {mn}")
    rewards = auction.schedule_from_spec(config.rewards)

    partition = _partition(config, rs, scheme != NO_COALITION_RANDOM)
    values = np.array([hedonic.coalition_value(partition, h, config.workers) for h in heads])
    valuations = config.valuation.sample(_stream(rs, _VALUATION), I)

    formula = math.nan
    if scheme == COALITION_AUCTION:
        table = auction.tabulate_bid(rewards, I, config.valuation, config.cost, config.bid_grid, config.quad_tol)
        raw = np.asarray(table(valuations), dtype=float)
        formula = auction.master_expected_utility(
            rewards, I, config.valuation, config.cost, phi=config.phi, table=table
        ).value
    else:
        raw = _stream(rs, _BIDS).uniform(0.0, values)
    bids = np.minimum(raw, values)
    clamped = int(np.sum(raw > values))
    if clamped:
        log.debug("round %d %s: %d bids clamped to coalition power", index, scheme, clamped)

    outcomes = auction.settle(
        valuations, bids, rewards, config.cost, _stream(rs, _TIES), config.include_comm_cost_on_loss
    )
    ranks = np.array([o.rank for o in outcomes])
    paid = tuple(o.reward for o in outcomes)
    total = float(np.sum(bids[ranks <= rewards.K]))

    times = completion_times(bids, config.cost.cycles, config.latency, _stream(rs, _LATENCY))
    order = np.lexsort((np.arange(I), times))
    fastest = [int(i) for i in order[:mn] if math.isfinite(times[i])]
    decode_ok = len(fastest) == mn
    checked = False
    if decode_ok:
        code = config.code
        field = polycode.PrimeField(code.modulus)
        mrng = _stream(rs, _MATRICES)
        A = field.random_matrix(mrng, (code.s, code.r))
        B = field.random_matrix(mrng, (code.s, code.t))
        task = polycode.encode(A, B, code.m, code.n, range(1, I + 1), field, head_ids)
        results = [polycode.local_compute(task.shares[i], field) for i in fastest]
        C = polycode.decode(results, code.m, code.n, field)
        if verify_every and index % verify_every == 0:
            checked = True
            if not np.array_equal(C, polycode.plain_product(A, B, field)):
                raise polycode.DecodeError(f"round {index}: decoded product does not match A^T B")

    return RunResult(
        round=index,
        scheme=scheme,
        head_ids=head_ids,
        partition=partition,
        coalition_values=tuple(values.tolist()),
        valuations=tuple(valuations.tolist()),
        bids=tuple(bids.tolist()),
        ranks=tuple(ranks.tolist()),
        rewards_paid=paid,
        completion_times=tuple(times.tolist()),
        fastest=tuple(head_ids[i] for i in fastest),
        decode_ok=decode_ok,
        decode_checked=checked,
        total_allocated_cpu=total,
        master_utility_formula=formula,
        master_utility_realized=config.phi * total - rewards.sigma,
        clamped=clamped,
    )


def run_rounds(
    config: ScenarioConfig,
    scheme: str,
    rounds: int,
    seed: int | None = None,
    threads: int = 1,
    start: int = 0,
) -> list[RunResult]:
    """Rounds start..start+rounds-1; output order never depends on `threads`."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    idx = range(start, start + rounds)
    if threads <= 1:
        return [run_round(config, scheme, i, seed) for i in idx]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: run_round(config, scheme, i, seed), idx))


@dataclass(frozen=True)
class SchemeSummary:
    scheme: str
    rounds: int
    mean_total_cpu: float
    stderr_total_cpu: float
    mean_master_utility: float
    decode_rate: float


def summarize(scheme: str, results: Sequence[RunResult]) -> SchemeSummary:
    x = np.array([r.total_allocated_cpu for r in results])
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    util = float(np.mean([r.master_utility_realized for r in results]))
    ok = float(np.mean([r.decode_ok for r in results]))
    return SchemeSummary(scheme, len(x), float(x.mean()), se, util, ok)


def compare_schemes(
    config: ScenarioConfig,
    rounds: int,
    seed: int | None = None,
    threads: int = 1,
    start: int = 0,
) -> list[SchemeSummary]:
    """All three schemes on identical per-round seeds."""
    return [summarize(s, run_rounds(config, s, rounds, seed, threads, start)) for s in SCHEMES]


def _schedule_for(config: ScenarioConfig, axis: str, value) -> tuple[RewardSchedule, int, str]:
    spec = config.rewards
    I = config.n_heads
    if axis == "n_heads":
        I = int(value)
    elif axis == "K":
        spec = replace(spec, K=int(value))
    elif axis == "reward_kind":
        kind = str(value)
        param = spec.param
        if kind == "arithmetic" and spec.kind != "arithmetic":
            param = 0.05
        if kind == "geometric" and spec.kind != "geometric":
            param = 0.8
        spec = replace(spec, kind=kind, param=param, K=1 if kind == "winner_take_all" else spec.K)
    elif axis in ("gamma", "eta"):
        spec = replace(spec, kind="arithmetic" if axis == "gamma" else "geometric", param=float(value))
    else:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    rewards = auction.schedule_from_spec(spec)
    label = spec.kind if spec.param is None or spec.kind in ("homogeneous", "winner_take_all") else f"{spec.kind}:{spec.param:g}"
    return rewards, I, label


def sweep(config: ScenarioConfig, axis: str, values: Sequence) -> list[tuple]:
    """Equilibrium bid curves, one per sweep value: (valuation, bid, kind, K, I) rows."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    rows = []
    for value in values:
        rewards, I, label = _schedule_for(config, axis, value)
        table = auction.tabulate_bid(rewards, I, config.valuation, config.cost, config.bid_grid, config.quad_tol)
        rows.extend((float(v), float(b), label, rewards.K, I) for v, b in zip(table.grid, table.bids))
    return rows


# ------------------------------------------------------------------ CSV


def _g(x: float) -> str:
    return f"{x:.9g}"


def write_rounds(path, results: Sequence[RunResult]) -> None:
    if not results:
        raise ValueError("no rounds to write")
    heads = results[0].head_ids
    cols = ["round", "scheme", "decode_ok", "total_allocated_cpu", "master_utility_formula",
            "master_utility_realized", "clamped", "fastest"]
    for h in heads:
        cols += [f"coalition_{h}", f"value_{h}", f"valuation_{h}", f"bid_{h}", f"rank_{h}", f"reward_{h}", f"time_{h}"]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(cols)
        for r in results:
            row = [r.round, r.scheme, int(r.decode_ok), _g(r.total_allocated_cpu), _g(r.master_utility_formula),
                   _g(r.master_utility_realized), r.clamped, ";".join(r.fastest)]
            for i, h in enumerate(r.head_ids):
                row += [";".join(sorted(r.partition.members(h))), _g(r.coalition_values[i]), _g(r.valuations[i]),
                        _g(r.bids[i]), r.ranks[i], _g(r.rewards_paid[i]), _g(r.completion_times[i])]
            out.writerow(row)


def write_schemes(path, summaries: Sequence[SchemeSummary]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["scheme", "rounds", "mean_total_cpu", "stderr_total_cpu", "mean_master_utility", "decode_rate"])
        for s in summaries:
            out.writerow([s.scheme, s.rounds, _g(s.mean_total_cpu), _g(s.stderr_total_cpu),
                          _g(s.mean_master_utility), _g(s.decode_rate)])
