"""JSON scenario files.

Field names mirror the dataclasses in :mod:`cdc_incent.model`. Any field the
loader does not know is rejected with a :class:`ConfigError` naming it.

Reward pools (``heads[].reward_pool``) and the master's total reward
(``rewards.sigma``) are independent quantities; nothing rescales one to the
other.
"""
from __future__ import annotations

import json
from dataclasses import fields
from importlib import resources
from pathlib import Path
from typing import Any

from .model import (
    ClusterHeadSpec,
    CodeSpec,
    CostModel,
    LatencySpec,
    Partition,
    RewardSpec,
    ScenarioConfig,
    SweepSpec,
    ValuationDistribution,
    WorkerSpec,
)

GOLDEN = ("fig2", "fig4", "fig7", "fig9")


class ConfigError(ValueError):
    pass


def _check_keys(obj: Any, allowed, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown field {unknown[0]!r}")
    return obj


def _names(cls) -> list[str]:
    return [f.name for f in fields(cls)]


def _worker(d: dict, i: int) -> WorkerSpec:
    _check_keys(d, _names(WorkerSpec), f"workers[{i}]")
    by_head = d.get("comm_cost_by_head", {})
    return WorkerSpec(
        id=str(d["id"]),
        cpu_power=float(d["cpu_power"]),
        unit_cost=float(d["unit_cost"]),
        comm_cost=float(d.get("comm_cost", 0.0)),
        comm_cost_by_head=tuple(sorted((str(h), float(c)) for h, c in by_head.items())),
    )


def _valuation(d: dict) -> ValuationDistribution:
    _check_keys(d, _names(ValuationDistribution), "valuation")
    kind = d.get("kind", "uniform")
    support = tuple(float(x) for x in d.get("support", (0.0, 1.0)))
    if kind == "tabulated":
        # stored as given: validate() reports a density that does not integrate to one
        return ValuationDistribution(
            "tabulated",
            (float(d["points"][0]), float(d["points"][-1])) if "support" not in d else support,
            tuple(float(x) for x in d["points"]),
            tuple(float(x) for x in d["density"]),
        )
    return ValuationDistribution(kind, support)


def _simple(cls, d: dict, where: str):
    _check_keys(d, _names(cls), where)
    return cls(**d)


def config_from_dict(d: dict) -> ScenarioConfig:
    _check_keys(d, _names(ScenarioConfig), "config")
    try:
        workers = tuple(_worker(w, i) for i, w in enumerate(d.get("workers", [])))
        heads = []
        for i, h in enumerate(d.get("heads", [])):
            _check_keys(h, _names(ClusterHeadSpec), f"heads[{i}]")
            heads.append(ClusterHeadSpec(str(h["id"]), float(h["cpu_power"]), float(h["reward_pool"])))
        kw: dict[str, Any] = {"workers": workers, "heads": tuple(heads)}
        if "cost" in d:
            kw["cost"] = _simple(CostModel, d["cost"], "cost")
        if "valuation" in d:
            kw["valuation"] = _valuation(d["valuation"])
        if "rewards" in d:
            r = dict(_check_keys(d["rewards"], _names(RewardSpec), "rewards"))
            if "values" in r:
                r["values"] = tuple(float(x) for x in r["values"])
                r.setdefault("K", len(r["values"]))
            kw["rewards"] = RewardSpec(**r)
        if "code" in d:
            kw["code"] = _simple(CodeSpec, d["code"], "code")
        if "latency" in d:
            kw["latency"] = _simple(LatencySpec, d["latency"], "latency")
        if d.get("initial_partition") is not None:
            kw["initial_partition"] = Partition.from_mapping(
                {str(h): [str(w) for w in ws] for h, ws in d["initial_partition"].items()}
            )
        if d.get("sweep") is not None:
            s = _check_keys(d["sweep"], _names(SweepSpec), "sweep")
            kw["sweep"] = SweepSpec(s["axis"], tuple(s["values"]))
        for key in ("rng_seed", "mc_rounds", "phi", "bid_grid", "quad_tol", "include_comm_cost_on_loss"):
            if key in d:
                kw[key] = d[key]
    except KeyError as exc:
        raise ConfigError(f"missing required field {exc.args[0]!r}") from None
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return ScenarioConfig(**kw)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    def worker(w: WorkerSpec) -> dict:
        out = {"id": w.id, "cpu_power": w.cpu_power, "unit_cost": w.unit_cost, "comm_cost": w.comm_cost}
        if w.comm_cost_by_head:
            out["comm_cost_by_head"] = dict(w.comm_cost_by_head)
        return out

    v = cfg.valuation
    val: dict[str, Any] = {"kind": v.kind, "support": list(v.support)}
    if v.kind == "tabulated":
        val.update(points=list(v.points), density=list(v.density))
    r = cfg.rewards
    rewards: dict[str, Any] = {"kind": r.kind, "K": r.K, "sigma": r.sigma, "param": r.param}
    if r.values:
        rewards["values"] = list(r.values)
    out = {
        "workers": [worker(w) for w in cfg.workers],
        "heads": [{"id": h.id, "cpu_power": h.cpu_power, "reward_pool": h.reward_pool} for h in cfg.heads],
        "cost": {f.name: getattr(cfg.cost, f.name) for f in fields(CostModel)},
        "valuation": val,
        "rewards": rewards,
        "code": {f.name: getattr(cfg.code, f.name) for f in fields(CodeSpec)},
        "rng_seed": cfg.rng_seed,
        "mc_rounds": cfg.mc_rounds,
        "phi": cfg.phi,
        "latency": {"kind": cfg.latency.kind, "jitter_rate": cfg.latency.jitter_rate},
        "bid_grid": cfg.bid_grid,
        "quad_tol": cfg.quad_tol,
        "include_comm_cost_on_loss": cfg.include_comm_cost_on_loss,
    }
    if cfg.initial_partition is not None:
        out["initial_partition"] = {h: sorted(s) for h, s in cfg.initial_partition.coalitions}
    if cfg.sweep is not None:
        out["sweep"] = {"axis": cfg.sweep.axis, "values": list(cfg.sweep.values)}
    return out


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")


def golden_path(name: str) -> Path:
    """Path of a bundled golden scenario (fig2, fig4, fig7, fig9)."""
    if name not in GOLDEN:
        raise ConfigError(f"no golden config named {name!r}")
    return Path(str(resources.files("cdc_incent") / "golden" / f"{name}.json"))


def load_golden(name: str) -> ScenarioConfig:
    return load_config(golden_path(name))
