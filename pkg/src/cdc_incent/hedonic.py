"""Hedonic coalition formation of workers around cluster heads (switch-rule dynamics)."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .model import ClusterHeadSpec, Partition, WorkerSpec

MINUS_INFINITY = -math.inf

# (head id, sorted member ids); the member set includes the worker itself
CoalitionKey = tuple[str, tuple[str, ...]]
HistorySet = dict[str, set]



@dataclass(frozen=True)
class SwitchRecord:
    step: int
    worker_id: str
    from_head: str
    to_head: str
    old_utility: float
    new_utility: float


def improves(new: float, old: float, tie_tol: float = 0.0) -> bool:
    """Strict preference as evaluated in floating point.

    With the default ``tie_tol=0`` two utilities that are equal in exact
    arithmetic can still differ by an ulp and trigger a move. A positive
    ``tie_tol`` demands a relative gain above it.
    """
    return new > old + tie_tol * max(1.0, abs(old))


def coalition_key(head_id: str, member_ids: Iterable[str]) -> CoalitionKey:
    return (head_id, tuple(sorted(set(member_ids))))


def _by_id(items) -> dict:
    if isinstance(items, Mapping):
        return dict(items)
    return {x.id: x for x in items}


def coalition_value(partition: Partition, head: ClusterHeadSpec, workers) -> float:
    """Total CPU power of a head and the workers in its coalition."""
    workers = _by_id(workers)
    members = partition.members(head.id)
    return head.cpu_power + math.fsum(workers[w].cpu_power for w in members)


def worker_utility(worker: WorkerSpec, members: Iterable[WorkerSpec], pool: float, mu: float) -> float:
    """Proportional share of the pool minus the worker's CPU and communication costs."""
    members = list(members)
    if not any(m.id == worker.id for m in members):
        raise ValueError(f"worker {worker.id!r} is not a member of the coalition")
    total = math.fsum(m.cpu_power for m in members)
    return worker.cpu_power / total * pool - worker.unit_cost * worker.cpu_power - mu


def preference_value(
    worker: WorkerSpec,
    key: CoalitionKey,
    history: HistorySet,
    workers,
    heads,
) -> float:
    """Utility of `worker` in coalition `key`, or MINUS_INFINITY if it joined that coalition before."""
    if key in history.get(worker.id, ()):
        return MINUS_INFINITY
    workers = _by_id(workers)
    head = _by_id(heads)[key[0]]
    return worker_utility(worker, [workers[w] for w in key[1]], head.reward_pool, worker.mu(head.id))


def _utility_in(worker: WorkerSpec, head: ClusterHeadSpec, member_ids, workers: dict) -> float:
    return worker_utility(worker, [workers[w] for w in member_ids], head.reward_pool, worker.mu(head.id))


def try_switch(
    worker: WorkerSpec,
    partition: Partition,
    history: HistorySet,
    workers,
    heads,
    tie_tol: float = 0.0,
) -> tuple[Partition, str, str, float, float] | None:
    """Apply the switch rule for one worker.

    Candidate coalitions are scanned in head-id order; the first one whose
    utility strictly exceeds the current utility and whose key is not in the
    worker's history is joined. On success the departed coalition key is added
    to ``history`` in place and ``(new_partition, from_head, to_head,
    old_utility, new_utility)`` is returned.
    """
    workers = _by_id(workers)
    heads = _by_id(heads)
    current = partition.head_of(worker.id)
    members = partition.members(current)
    old = _utility_in(worker, heads[current], members, workers)
    seen = history.setdefault(worker.id, set())
    for hid in sorted(heads):
        if hid == current:
            continue
        target = partition.members(hid) | {worker.id}
        key = coalition_key(hid, target)
        if key in seen:
            continue
        new = _utility_in(worker, heads[hid], target, workers)
        if improves(new, old, tie_tol):
            seen.add(coalition_key(current, members))
            return partition.move(worker.id, hid), current, hid, old, new
    return None


def random_partition(worker_ids: Sequence[str], head_ids: Sequence[str], rng: np.random.Generator) -> Partition:
    heads = sorted(head_ids)
    picks = rng.integers(0, len(heads), size=len(worker_ids)) if heads else []
    mapping: dict[str, list] = {h: [] for h in heads}
    for w, k in zip(sorted(worker_ids), picks):
        mapping[heads[k]].append(w)
    return Partition.from_mapping(mapping)


def form_coalitions(
    workers: Sequence[WorkerSpec],
    heads: Sequence[ClusterHeadSpec],
    initial: Partition | int | np.random.Generator | None = None,
    on_turn: Callable[[str, float, SwitchRecord | None], None] | None = None,
    max_passes: int = 100_000,
    order: Sequence[str] | None = None,
    tie_tol: float = 0.0,
) -> tuple[Partition, list[SwitchRecord]]:
    """Run switch-rule dynamics until a full pass over the workers changes nothing.

    Workers take turns round-robin, in id order unless ``order`` gives
    another permutation of the worker ids. ``initial`` is an explicit
    partition, or a seed / generator for a uniform random assignment.
    ``on_turn(worker_id, utility, record)`` runs after every turn with the
    utility the worker held when the turn began and the switch it made, if any.

    Histories only forbid revisits within a phase. If a quiet pass ends on a
    partition that some worker would still leave, the histories are cleared
    and the dynamics resume. Every accepted move is a strict improvement, and
    with head-independent costs mu each one lowers the potential
    sum_i (Z_i^2 + sum_{j in S_i} z_j^2) / rho_i, so the restarts terminate.
    """
    by_w = _by_id(workers)
    by_h = _by_id(heads)
    if isinstance(initial, Partition):
        partition = initial
    else:
        rng = initial if isinstance(initial, np.random.Generator) else np.random.default_rng(initial)
        partition = random_partition(list(by_w), list(by_h), rng)
    history: HistorySet = {w: set() for w in by_w}
    log: list[SwitchRecord] = []
    if order is None:
        order = sorted(by_w)
    elif sorted(order) != sorted(by_w):
        raise ValueError("order must list every worker id exactly once")
    for _ in range(max_passes):
        changed = False
        for wid in order:
            w = by_w[wid]
            res = try_switch(w, partition, history, by_w, by_h, tie_tol)
            rec = None
            if res is not None:
                partition, src, dst, old, new = res
                rec = SwitchRecord(len(log) + 1, wid, src, dst, old, new)
                log.append(rec)
                changed = True
            if on_turn is not None:
                if rec is None:
                    cur = partition.head_of(wid)
                    on_turn(wid, _utility_in(w, by_h[cur], partition.members(cur), by_w), None)
                else:
                    on_turn(wid, rec.old_utility, rec)
        if not changed:
            if is_nash_stable(partition, by_w, by_h, tie_tol):
                return partition, log
            # the histories blocked the last improving moves; start a fresh phase
            history = {w: set() for w in by_w}
    raise RuntimeError(f"coalition formation did not settle within {max_passes} passes")


def decision_utilities(
    worker_id: str,
    workers: Sequence[WorkerSpec],
    heads: Sequence[ClusterHeadSpec],
    initial: Partition | int | np.random.Generator | None = None,
    **kwargs,
) -> list[float]:
    """Utilities one worker holds at its successive decisions.

    The worker's utility at each of its turns, followed by the utility it
    obtains whenever it switches; consecutive repeats are dropped, so the
    list changes value only when others join or leave, or when it moves.
    """
    out: list[float] = []

    def note(wid, utility, rec):
        if wid != worker_id:
            return
        for u in (utility,) if rec is None else (utility, rec.new_utility):
            if not out or u != out[-1]:
                out.append(u)

    form_coalitions(workers, heads, initial, on_turn=note, **kwargs)
    return out


def is_nash_stable(partition: Partition, workers, heads, tie_tol: float = 0.0) -> bool:
    """True iff no worker gains by unilaterally moving to another coalition (histories ignored)."""
    by_w = _by_id(workers)
    by_h = _by_id(heads)
    for hid, members in partition.coalitions:
        for wid in members:
            w = by_w[wid]
            here = _utility_in(w, by_h[hid], members, by_w)
            for other, their in partition.coalitions:
                if other == hid:
                    continue
                if improves(_utility_in(w, by_h[other], their | {wid}, by_w), here, tie_tol):
                    return False
    return True


def write_switch_log(log: Iterable[SwitchRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["step", "worker_id", "from_head", "to_head", "old_utility", "new_utility"])
        for r in log:
            out.writerow([r.step, r.worker_id, r.from_head, r.to_head, f"{r.old_utility:.9g}", f"{r.new_utility:.9g}"])
