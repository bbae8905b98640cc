"""Domain types shared by the coalition, auction, coding and simulation layers.

All types are frozen dataclasses. Constructors do not enforce invariants so
that a malformed scenario can still be loaded and reported on by
:func:`validate`; the numerical layers assume a validated config.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

REWARD_KINDS = ("homogeneous", "arithmetic", "geometric", "winner_take_all", "explicit")
COST_SHAPES = ("quadratic", "linear")
LATENCY_KINDS = ("deterministic", "shifted_exponential")
MERSENNE_31 = 2**31 - 1


@dataclass(frozen=True)
class WorkerSpec:
    id: str
    cpu_power: float
    unit_cost: float
    comm_cost: float = 0.0
    # (head_id, cost) pairs overriding comm_cost for specific heads
    comm_cost_by_head: tuple[tuple[str, float], ...] = ()

    def mu(self, head_id: str) -> float:
        for hid, cost in self.comm_cost_by_head:
            if hid == head_id:
                return cost
        return self.comm_cost


@dataclass(frozen=True)
class ClusterHeadSpec:
    id: str
    cpu_power: float
    reward_pool: float


@dataclass(frozen=True)
class Partition:
    """Assignment of every worker to exactly one cluster-head coalition."""

    coalitions: tuple[tuple[str, frozenset], ...]

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Sequence[str]]) -> "Partition":
        return cls(tuple((h, frozenset(mapping[h])) for h in sorted(mapping)))

    @classmethod
    def empty(cls, head_ids: Sequence[str]) -> "Partition":
        return cls(tuple((h, frozenset()) for h in sorted(head_ids)))

    def as_dict(self) -> dict[str, frozenset]:
        return dict(self.coalitions)

    @property
    def head_ids(self) -> list[str]:
        return [h for h, _ in self.coalitions]

    def members(self, head_id: str) -> frozenset:
        for h, s in self.coalitions:
            if h == head_id:
                return s
        raise KeyError(f"unknown cluster head {head_id!r}")

    def head_of(self, worker_id: str) -> str:
        for h, s in self.coalitions:
            if worker_id in s:
                return h
        raise KeyError(f"worker {worker_id!r} is not assigned")

    def move(self, worker_id: str, to_head: str) -> "Partition":
        from_head = self.head_of(worker_id)
        out = []
        for h, s in self.coalitions:
            if h == from_head:
                s = s - {worker_id}
            if h == to_head:
                s = s | {worker_id}
            out.append((h, s))
        return Partition(tuple(out))

    def check(self, worker_ids: Sequence[str], head_ids: Sequence[str]) -> list[str]:
        problems = []
        seen: set = set()
        for h, s in self.coalitions:
            dup = seen & s
            if dup:
                problems.append(f"partition: workers {sorted(dup)} appear in more than one coalition")
            seen |= s
        if seen != set(worker_ids):
            missing = sorted(set(worker_ids) - seen)
            extra = sorted(seen - set(worker_ids))
            problems.append(f"partition: does not cover the worker set (missing={missing}, unknown={extra})")
        if sorted(self.head_ids) != sorted(head_ids):
            problems.append("partition: coalition count does not match the cluster heads")
        return problems


@dataclass(frozen=True)
class RewardSchedule:
    rewards: tuple[float, ...]
    sigma: float

    @property
    def K(self) -> int:
        return len(self.rewards)

    def padded(self, length: int) -> np.ndarray:
        """Rewards as an array of exactly `length` entries (zero-padded or truncated)."""
        out = np.zeros(length)
        k = min(length, len(self.rewards))
        out[:k] = self.rewards[:k]
        return out

    def scaled(self, factor: float) -> "RewardSchedule":
        return RewardSchedule(tuple(factor * m for m in self.rewards), factor * self.sigma)

    def violations(self) -> list[str]:
        out = []
        r = self.rewards
        if not r:
            out.append("rewards: schedule is empty")
            return out
        if any(r[k + 1] > r[k] for k in range(len(r) - 1)):
            out.append("rewards: ordering violated, need M_1 >= M_2 >= ... >= M_K")
        if r[-1] <= 0:
            out.append("rewards: M_K must be strictly positive")
        total = math.fsum(r)
        if abs(total - self.sigma) > 1e-9 * max(abs(self.sigma), 1.0):
            out.append(f"rewards: sum of M_k is {total:.12g} but sigma is {self.sigma:.12g}")
        return out


@dataclass(frozen=True)
class ValuationDistribution:
    """Valuation prior on [lo, hi]: uniform, or a piecewise-linear density."""

    kind: str = "uniform"
    support: tuple[float, float] = (0.0, 1.0)
    points: tuple[float, ...] = ()
    density: tuple[float, ...] = ()

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "ValuationDistribution":
        return cls("uniform", (float(lo), float(hi)))

    @classmethod
    def tabulated(cls, points, density, normalize: bool = True) -> "ValuationDistribution":
        x = np.asarray(points, dtype=float)
        d = np.asarray(density, dtype=float)
        if normalize:
            d = d / np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(x))
        return cls("tabulated", (float(x[0]), float(x[-1])), tuple(x.tolist()), tuple(d.tolist()))

    @property
    def lo(self) -> float:
        return self.support[0]

    @property
    def hi(self) -> float:
        return self.support[1]

    def knots(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(knot positions, density at knots, cdf at knots) of the piecewise-linear density."""
        if self.kind == "uniform":
            x = np.array(self.support, dtype=float)
            d = np.full(2, 1.0 / (x[1] - x[0]))
        else:
            x = np.asarray(self.points, dtype=float)
            d = np.asarray(self.density, dtype=float)
        c = np.concatenate(([0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(x))))
        return x, d, c

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "uniform":
            inside = (v >= self.lo) & (v <= self.hi)
            return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)
        x, d, _ = self.knots()
        return np.interp(v, x, d, left=0.0, right=0.0)

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "uniform":
            return np.clip((v - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        x, d, c = self.knots()
        vc = np.clip(v, x[0], x[-1])
        i = np.clip(np.searchsorted(x, vc, side="right") - 1, 0, len(x) - 2)
        h = x[i + 1] - x[i]
        u = vc - x[i]
        return np.clip(c[i] + d[i] * u + (d[i + 1] - d[i]) * u * u / (2.0 * h), 0.0, 1.0)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        u = rng.random(size)
        if self.kind == "uniform":
            return self.lo + (self.hi - self.lo) * u
        return self.ppf(u)

    def ppf(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind == "uniform":
            return self.lo + (self.hi - self.lo) * q
        x, d, c = self.knots()
        i = np.clip(np.searchsorted(c, q, side="right") - 1, 0, len(x) - 2)
        h = x[i + 1] - x[i]
        slope = (d[i + 1] - d[i]) / h
        rem = q - c[i]
        # solve d_i u + slope u^2 / 2 = rem on the segment
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = np.sqrt(np.maximum(d[i] ** 2 + 2.0 * slope * rem, 0.0))
            u = np.where(np.abs(slope) > 1e-14, 2.0 * rem / (d[i] + disc), rem / d[i])
        u = np.nan_to_num(u, nan=0.0, posinf=0.0)
        return np.clip(x[i] + u, x[i], x[i + 1])

    def violations(self) -> list[str]:
        out = []
        if self.kind not in ("uniform", "tabulated"):
            return [f"valuation: unknown kind {self.kind!r}"]
        if not self.hi > self.lo:
            return ["valuation: support must satisfy v_lo < v_hi"]
        if self.kind == "tabulated":
            x = np.asarray(self.points, dtype=float)
            d = np.asarray(self.density, dtype=float)
            if len(x) < 2 or len(x) != len(d):
                return ["valuation: tabulated points and density must have equal length >= 2"]
            if np.any(np.diff(x) <= 0):
                out.append("valuation: tabulated points must be strictly increasing")
            if np.any(d < 0):
                out.append("valuation: density must be nonnegative")
            if x[0] != self.lo or x[-1] != self.hi:
                out.append("valuation: tabulated points must span the support exactly")
            mass = float(np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(x)))
            if abs(mass - 1.0) > 1e-8:
                out.append(f"valuation: density integrates to {mass:.10g}, not 1")
        return out


@dataclass(frozen=True)
class CostModel:
    """Energy cost of a cluster head's CPU allocation.

    Bid-dependent part is ``theta_p * kappa * cycles * scale * tau**2`` for the
    quadratic shape (``tau**1`` for linear); ``theta_c * comm_energy`` is a fixed
    participation cost that is never inverted.
    """

    theta_p: float = 1.0
    theta_c: float = 1.0
    kappa: float = 1e-25
    cycles: float = 5e9
    comm_energy: float = 5.0
    scale: float = 1.0
    shape: str = "quadratic"

    @property
    def coefficient(self) -> float:
        return self.theta_p * self.kappa * self.cycles * self.scale

    @property
    def fixed(self) -> float:
        return self.theta_c * self.comm_energy

    @classmethod
    def normalized(cls, comm_energy: float = 0.0) -> "CostModel":
        """Quadratic cost with theta_p * kappa * a == 1."""
        return cls(theta_p=1.0, theta_c=1.0, kappa=1.0, cycles=1.0, comm_energy=comm_energy)

    def violations(self) -> list[str]:
        out = []
        for name in ("theta_p", "theta_c", "kappa", "cycles", "comm_energy", "scale"):
            if getattr(self, name) < 0:
                out.append(f"cost: {name} must be >= 0")
        if not self.kappa * self.cycles > 0:
            out.append("cost: kappa * cycles must be > 0 for cost inversion")
        if self.shape not in COST_SHAPES:
            out.append(f"cost: unknown shape {self.shape!r}")
        return out


@dataclass(frozen=True)
class RewardSpec:
    kind: str = "homogeneous"
    K: int = 4
    sigma: float = 1.0
    param: float | None = None
    values: tuple[float, ...] = ()


@dataclass(frozen=True)
class CodeSpec:
    m: int = 2
    n: int = 2
    modulus: int = MERSENNE_31
    s: int = 4
    r: int = 4
    t: int = 4


@dataclass(frozen=True)
class LatencySpec:
    kind: str = "deterministic"
    jitter_rate: float = 1.0


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple


@dataclass(frozen=True)
class ScenarioConfig:
    workers: tuple[WorkerSpec, ...]
    heads: tuple[ClusterHeadSpec, ...]
    cost: CostModel = field(default_factory=CostModel)
    valuation: ValuationDistribution = field(default_factory=ValuationDistribution)
    rewards: RewardSpec = field(default_factory=RewardSpec)
    code: CodeSpec = field(default_factory=CodeSpec)
    rng_seed: int | None = None
    mc_rounds: int = 1000
    phi: float = 1.0
    latency: LatencySpec = field(default_factory=LatencySpec)
    bid_grid: int = 512
    quad_tol: float = 1e-10
    include_comm_cost_on_loss: bool = True
    initial_partition: Partition | None = None
    sweep: SweepSpec | None = None

    @property
    def n_heads(self) -> int:
        return len(self.heads)

    def head(self, head_id: str) -> ClusterHeadSpec:
        for h in self.heads:
            if h.id == head_id:
                return h
        raise KeyError(f"unknown cluster head {head_id!r}")


def _reward_violations(spec: RewardSpec) -> list[str]:
    if spec.kind not in REWARD_KINDS:
        return [f"rewards: unknown kind {spec.kind!r}"]
    if spec.kind == "explicit":
        out = RewardSchedule(tuple(spec.values), spec.sigma).violations()
        if spec.values and spec.K != len(spec.values):
            out.append(f"rewards: K={spec.K} but {len(spec.values)} explicit values given")
        return out
    if spec.K < 1:
        return ["rewards: K must be >= 1"]
    if not spec.sigma > 0:
        return ["rewards: sigma must be > 0"]
    if spec.kind == "winner_take_all" and spec.K != 1:
        return ["rewards: winner_take_all requires K=1"]
    if spec.kind == "arithmetic":
        if spec.param is None or not spec.param > 0:
            return ["rewards: arithmetic gamma must be > 0"]
        last = spec.sigma / spec.K - spec.param * (spec.K - 1) / 2.0
        if not last > 0:
            return [f"rewards: arithmetic gamma={spec.param} makes M_K <= 0"]
    if spec.kind == "geometric":
        if spec.param is None or not 0 <= spec.param <= 1:
            return ["rewards: geometric eta must lie in [0, 1]"]
        if spec.param == 0 and spec.K > 1:
            return ["rewards: geometric eta=0 makes M_2..M_K zero"]
    return []


def validate(config: ScenarioConfig) -> list[str]:
    """Every invariant breach in `config`, one description per problem. Never raises."""
    out: list[str] = []
    worker_ids = [w.id for w in config.workers]
    head_ids = [h.id for h in config.heads]
    if len(set(worker_ids)) != len(worker_ids):
        out.append("workers: duplicate worker ids")
    if len(set(head_ids)) != len(head_ids):
        out.append("heads: duplicate cluster head ids")
    if not config.heads:
        out.append("heads: at least one cluster head is required")
    for w in config.workers:
        if not w.cpu_power > 0:
            out.append(f"worker {w.id}: cpu_power must be > 0")
        if w.unit_cost < 0:
            out.append(f"worker {w.id}: unit_cost must be >= 0")
        if w.comm_cost < 0 or any(c < 0 for _, c in w.comm_cost_by_head):
            out.append(f"worker {w.id}: comm_cost must be >= 0")
        unknown = [h for h, _ in w.comm_cost_by_head if h not in head_ids]
        if unknown:
            out.append(f"worker {w.id}: comm_cost_by_head names unknown heads {unknown}")
    for h in config.heads:
        if not h.cpu_power > 0:
            out.append(f"head {h.id}: cpu_power must be > 0")
        if h.reward_pool < 0:
            out.append(f"head {h.id}: reward_pool must be >= 0")
    out.extend(config.cost.violations())
    out.extend(config.valuation.violations())
    out.extend(_reward_violations(config.rewards))
    if config.heads and config.rewards.K > len(config.heads):
        out.append(f"rewards: K={config.rewards.K} exceeds the number of cluster heads I={len(config.heads)}")
    c = config.code
    if c.m < 1 or c.n < 1:
        out.append("code: m and n must be >= 1")
    elif c.m * c.n > len(config.heads):
        out.append(f"code: recovery threshold m*n={c.m * c.n} exceeds the number of cluster heads")
    if c.m >= 1 and c.r % c.m:
        out.append(f"code: m={c.m} does not divide r={c.r}")
    if c.n >= 1 and c.t % c.n:
        out.append(f"code: n={c.n} does not divide t={c.t}")
    if c.modulus < 2 or not _is_prime(c.modulus):
        out.append(f"code: modulus {c.modulus} is not prime")
    elif c.modulus > MERSENNE_31:
        out.append("code: modulus must be < 2**31 so products fit in 64-bit arithmetic")
    if c.modulus >= 2 and len(config.heads) >= c.modulus:
        out.append("code: field too small for distinct evaluation points")
    if config.rng_seed is not None and not 0 <= config.rng_seed < 2**64:
        out.append("rng_seed: must be an unsigned 64-bit integer")
    if config.mc_rounds < 1:
        out.append("mc_rounds: must be >= 1")
    if config.latency.kind not in LATENCY_KINDS:
        out.append(f"latency: unknown kind {config.latency.kind!r}")
    elif config.latency.kind == "shifted_exponential" and not config.latency.jitter_rate > 0:
        out.append("latency: jitter_rate must be > 0")
    if config.bid_grid < 256:
        out.append("bid_grid: at least 256 grid points are required")
    if not config.quad_tol > 0:
        out.append("quad_tol: must be > 0")
    if config.initial_partition is not None:
        out.extend(config.initial_partition.check(worker_ids, head_ids))
    return out


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if p % q == 0:
            return p == q
    # deterministic Miller-Rabin for p < 3.3e24
    d, s = p - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, p)
        if x in (1, p - 1):
            continue
        for _ in range(s - 1):
            x = x * x % p
            if x == p - 1:
                break
        else:
            return False
    return True
