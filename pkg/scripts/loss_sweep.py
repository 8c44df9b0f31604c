"""Degradation of the distributed protocols as message loss grows.

Writes one canonical JSON report per protocol; reruns with the same
arguments are byte-identical.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fleetalloc.distributed import loss_sweep, sweep_report
from fleetalloc.instance import AssignmentInstance


@dataclass
class SweepConfig:
    n: int = 6
    instances: int = 20
    topology: str = "ring"
    levels: list[str] = field(default_factory=lambda: [f"{k}/10" for k in range(10)])
    max_rounds: int = 200
    high: int = 50
    seed: int = 0
    out_dir: Path = Path("results")


def run(cfg: SweepConfig) -> dict[str, str]:
    rng = np.random.default_rng(cfg.seed)
    batch = [
        AssignmentInstance.from_matrix(rng.integers(0, cfg.high + 1, (cfg.n, cfg.n)), sense="max")
        for _ in range(cfg.instances)
    ]
    reports = {}
    for protocol in ("dauction", "cbaa"):
        rows = loss_sweep(protocol, batch, cfg.topology, cfg.levels, seed=cfg.seed, max_rounds=cfg.max_rounds)
        reports[protocol] = sweep_report(rows)
    return reports


def main() -> None:
    cfg = SweepConfig()
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=cfg.n)
    p.add_argument("--instances", type=int, default=cfg.instances)
    p.add_argument("--topology", default=cfg.topology, choices=("complete", "ring", "line", "er"))
    p.add_argument("--max-rounds", type=int, default=cfg.max_rounds)
    p.add_argument("--seed", type=int, default=cfg.seed)
    p.add_argument("--out-dir", type=Path, default=cfg.out_dir)
    args = p.parse_args()
    cfg = SweepConfig(
        n=args.n, instances=args.instances, topology=args.topology,
        max_rounds=args.max_rounds, seed=args.seed, out_dir=args.out_dir,
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    for protocol, text in run(cfg).items():
        path = cfg.out_dir / f"loss_sweep_{protocol}_{cfg.topology}.json"
        path.write_text(text)
        print(f"{protocol}: {path}")
        print(text)


if __name__ == "__main__":
    main()
