"""Command-line front end.

Exit status: 0 on success, 1 when the config is invalid (one violation per
line on stderr), 2 when a numerical operation fails.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace

from . import auction, hedonic, simulate
from .config import ConfigError, load_config
from .model import ScenarioConfig, validate
from .polycode import DecodeError
from .quadrature import QuadratureError
from .selftest import run_selftest

log = logging.getLogger("cdc_incent")

LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
NEEDS_SEED = ("coalition", "rewards", "simulate", "compare")



def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cdc-incent", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_, out_help=None):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, metavar="PATH", help="scenario JSON file")
        sp.add_argument("--seed", type=int, metavar="U64", help="overrides rng_seed from the config")
        if out_help:
            sp.add_argument("--out", metavar="PATH", help=out_help)
        return sp

    c = add("coalition", "form worker coalitions by switch-rule dynamics", "final partition CSV")
    c.add_argument("--log", metavar="PATH", help="switch log CSV")

    add("equilibrium", "tabulate equilibrium bid curves", "curves CSV (stdout if omitted)")

    r = add("rewards", "evaluate reward schedules for the master", "schedule table CSV")
    r.add_argument("--method", choices=("formula", "mc"), default="formula")
    r.add_argument("--rounds", type=int, metavar="N", help="Monte Carlo rounds (default: mc_rounds)")

    s = add("simulate", "run end-to-end rounds", "rounds CSV")
    s.add_argument("--rounds", type=int, metavar="N")
    s.add_argument("--threads", type=int, default=1, metavar="N")
    s.add_argument("--scheme", choices=simulate.SCHEMES, default=simulate.COALITION_AUCTION)
    s.add_argument("--method", choices=("formula", "mc"), default="mc",
                   help="master utility shown in the summary: closed form or realised mean")

    cmp_ = add("compare", "compare the three allocation schemes", "schemes CSV")
    cmp_.add_argument("--rounds", type=int, metavar="N")
    cmp_.add_argument("--threads", type=int, default=1, metavar="N")

    sub.add_parser("selftest", help="run the embedded oracle checks")
    return p


def _setup_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("CDC_INCENT_LOG", "quiet").strip().lower(), logging.WARNING)
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(level)
    log.propagate = False


def _load(args) -> tuple[ScenarioConfig | None, list[str]]:
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        return None, [f"config: {exc}"]
    if args.seed is not None:
        cfg = replace(cfg, rng_seed=args.seed)
    problems = validate(cfg)
    if args.command in NEEDS_SEED and cfg.rng_seed is None:
        problems.append("rng_seed: no seed in the config and no --seed flag")
    return cfg, problems


def _cmd_coalition(cfg: ScenarioConfig, args) -> None:
    initial = cfg.initial_partition if cfg.initial_partition is not None else cfg.rng_seed
    partition, switches = hedonic.form_coalitions(cfg.workers, cfg.heads, initial)
    if args.log:
        hedonic.write_switch_log(switches, args.log)
    rows = []
    for h in sorted(cfg.heads, key=lambda h: h.id):
        members = sorted(partition.members(h.id))
        rows.append((h.id, ";".join(members), f"{hedonic.coalition_value(partition, h, cfg.workers):.9g}"))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["head_id", "workers", "coalition_value"])
            w.writerows(rows)
    for hid, members, value in rows:
        print(f"head {hid}: workers [{members.replace(';', ', ')}] value {value} W")
    stable = hedonic.is_nash_stable(partition, cfg.workers, cfg.heads)
    print(f"{len(switches)} switches; nash_stable={stable}")


def _cmd_equilibrium(cfg: ScenarioConfig, args) -> None:
    if cfg.sweep is not None:
        rows = simulate.sweep(cfg, cfg.sweep.axis, cfg.sweep.values)
    else:
        rows = simulate.sweep(cfg, "K", [cfg.rewards.K])
    if args.out:
        auction.write_curves(args.out, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["valuation", "bid_watts", "schedule_kind", "K", "I"])
        w.writerows([f"{v:.9g}", f"{b:.9g}", k, K, I] for v, b, k, K, I in rows)


def _cmd_rewards(cfg: ScenarioConfig, args) -> None:
    I = cfg.n_heads
    specs = [(cfg.rewards, None)]
    if cfg.sweep is not None and cfg.sweep.axis in ("reward_kind", "gamma", "eta", "K"):
        specs = [(None, v) for v in cfg.sweep.values]
    rounds = args.rounds or cfg.mc_rounds
    out_rows = []
    for spec, value in specs:
        if spec is not None:
            rewards = auction.schedule_from_spec(spec)
            label = spec.kind
        else:
            rewards, _, label = simulate._schedule_for(cfg, cfg.sweep.axis, value)
        res = auction.master_expected_utility(
            rewards, I, cfg.valuation, cfg.cost, phi=cfg.phi, method=args.method, rounds=rounds, seed=cfg.rng_seed,
            table=auction.tabulate_bid(rewards, I, cfg.valuation, cfg.cost, cfg.bid_grid, cfg.quad_tol),
        )
        out_rows.append([label, rewards.K, f"{rewards.sigma:.9g}", ";".join(f"{m:.9g}" for m in rewards.rewards),
                         f"{res.value:.9g}", f"{res.stderr:.9g}", res.method])
        print(f"{label:<18} K={rewards.K:<3} master_utility={res.value:.9g} stderr={res.stderr:.3g}")
        if rewards.K >= 2:
            single, multi, gap = auction.winner_take_all_gap(
                I, cfg.valuation, cfg.cost, rewards.sigma, rewards, cfg.phi, cfg.bid_grid, cfg.quad_tol
            )
            shown = "N/A" if gap is None else f"{gap:.9g}"
            print(f"{'':<18} winner_take_all={single:.9g} gap={shown}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["schedule_kind", "K", "sigma", "rewards", "master_utility", "stderr", "method"])
            w.writerows(out_rows)


def _cmd_simulate(cfg: ScenarioConfig, args) -> None:
    rounds = args.rounds or cfg.mc_rounds
    results = simulate.run_rounds(cfg, args.scheme, rounds, cfg.rng_seed, args.threads)
    if args.out:
        simulate.write_rounds(args.out, results)
    s = simulate.summarize(args.scheme, results)
    util = results[0].master_utility_formula if args.method == "formula" else s.mean_master_utility
    print(f"{args.scheme}: rounds={s.rounds} mean_total_cpu={s.mean_total_cpu:.9g} "
          f"stderr={s.stderr_total_cpu:.3g} master_utility={util:.9g} decode_rate={s.decode_rate:.3g}")


def _cmd_compare(cfg: ScenarioConfig, args) -> None:
    rounds = args.rounds or cfg.mc_rounds
    summaries = simulate.compare_schemes(cfg, rounds, cfg.rng_seed, args.threads)
    if args.out:
        simulate.write_schemes(args.out, summaries)
    for s in summaries:
        print(f"{s.scheme:<20} mean_total_cpu={s.mean_total_cpu:.9g} stderr={s.stderr_total_cpu:.3g}")


COMMANDS = {
    "coalition": _cmd_coalition,
    "equilibrium": _cmd_equilibrium,
    "rewards": _cmd_rewards,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    _setup_logging()
    if args.command == "selftest":
        return 0 if run_selftest() else 2
    cfg, problems = _load(args)
    if problems:
        for line in problems:
            print(line, file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](cfg, args)
    except (QuadratureError, DecodeError, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"error: {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
