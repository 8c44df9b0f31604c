"""Regret of online policies against the clairvoyant optimum.

Sweeps seeded scenarios, runs every policy in commit and reassign mode and
writes a CSV with one row per (scenario, mode, policy).
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from fleetalloc.dynamic import clairvoyant_optimum, generate_scenario, make_policy, run_scenario, validate_trajectory
from fleetalloc.report import write_csv

POLICIES = ("myopic", "greedy", "bottleneck", "fair", "mindev", "ksum:2")


@dataclass
class RegretConfig:
    scenarios: int = 50
    max_agents: int = 5
    max_tasks: int = 5
    max_horizon: int = 5
    high: int = 9
    eta: int = 2
    seed: int = 0
    out: Path = Path("results/policy_regret.csv")


def run(cfg: RegretConfig) -> list[dict]:
    rows = []
    for k in range(cfg.scenarios):
        rng = np.random.default_rng([cfg.seed, k])
        n = int(rng.integers(1, cfg.max_agents + 1))
        m = int(rng.integers(1, cfg.max_tasks + 1))
        horizon = int(rng.integers(1, cfg.max_horizon + 1))
        base = generate_scenario(n, m, horizon, high=cfg.high, seed=cfg.seed * 100_003 + k)
        best = clairvoyant_optimum(base)
        for mode in ("commit", "reassign"):
            sc = base.replace(mode=mode, eta=rng.integers(1, cfg.eta + 1, (n, m)) if mode == "reassign" else None)
            for name in POLICIES:
                traj = run_scenario(sc, make_policy(name))
                if not validate_trajectory(sc, traj).passed:
                    raise RuntimeError(f"invalid trajectory for scenario {k}, {mode}, {name}")
                rows.append(
                    {
                        "scenario": k,
                        "agents": n,
                        "tasks": m,
                        "horizon": horizon,
                        "mode": mode,
                        "policy": name,
                        "Z": str(traj.total),
                        "clairvoyant": str(best),
                        "ratio": str(traj.total / best) if best else "",
                    }
                )
    return rows


def summarize(rows: list[dict]) -> dict[tuple[str, str], Fraction]:
    groups: dict[tuple[str, str], list[Fraction]] = {}
    for r in rows:
        if r["ratio"]:
            groups.setdefault((r["mode"], r["policy"]), []).append(Fraction(r["ratio"]))
    return {key: sum(v, Fraction(0)) / len(v) for key, v in sorted(groups.items())}


def main() -> None:
    cfg = RegretConfig()
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenarios", type=int, default=cfg.scenarios)
    p.add_argument("--seed", type=int, default=cfg.seed)
    p.add_argument("--out", type=Path, default=cfg.out)
    args = p.parse_args()
    cfg = RegretConfig(scenarios=args.scenarios, seed=args.seed, out=args.out)
    rows = run(cfg)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out, rows)
    print(f"{len(rows)} rows -> {cfg.out}")
    for (mode, policy), mean in summarize(rows).items():
        print(f"{mode:9s} {policy:11s} mean Z/Z* = {float(mean):.4f}")


if __name__ == "__main__":
    main()
