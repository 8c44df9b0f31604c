"""Wall time of the Hungarian method and the scaled auction on dense instances."""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fleetalloc.instance import AssignmentInstance, objective_value
from fleetalloc.lap import solve_auction_scaled, solve_hungarian
from fleetalloc.report import write_csv


@dataclass
class BenchConfig:
    sizes: list[int] = field(default_factory=lambda: [100, 250, 500, 1000])
    high: int = 1000
    seed: int = 0
    out: Path = Path("results/scale_benchmark.csv")


def run(cfg: BenchConfig) -> list[dict]:
    rows = []
    for n in cfg.sizes:
        rng = np.random.default_rng([cfg.seed, n])
        inst = AssignmentInstance.from_matrix(rng.integers(0, cfg.high, (n, n)))
        start = time.perf_counter()
        m_h, duals = solve_hungarian(inst)
        t_h = time.perf_counter() - start
        start = time.perf_counter()
        m_a, _, trace = solve_auction_scaled(inst)
        t_a = time.perf_counter() - start
        value = objective_value(inst, m_h)
        rows.append(
            {
                "n": n,
                "hungarian_s": f"{t_h:.3f}",
                "auction_scaled_s": f"{t_a:.3f}",
                "auction_rounds": trace.rounds,
                "value": str(value),
                "dual_gap": str(value - duals.value()),
                "values_agree": objective_value(inst, m_a) == value,
            }
        )
    return rows


def main() -> None:
    cfg = BenchConfig()
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", type=int, nargs="+", default=cfg.sizes)
    p.add_argument("--seed", type=int, default=cfg.seed)
    p.add_argument("--out", type=Path, default=cfg.out)
    args = p.parse_args()
    cfg = BenchConfig(sizes=args.sizes, seed=args.seed, out=args.out)
    rows = run(cfg)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out, rows)
    for r in rows:
        print(r)


if __name__ == "__main__":
    main()
