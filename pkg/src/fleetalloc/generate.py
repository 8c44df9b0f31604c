"""Seeded generators for instances, scenarios and topologies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributed import NetworkTopology
from .dynamic import Mode, generate_scenario
from .instance import AssignmentInstance, Sense

MAX_SIZE = 10_000


@dataclass(frozen=True)
class InstanceParams:
    n: int
    m: int | None = None
    low: int = 0
    high: int = 99
    sense: str = "min"

    def check(self) -> None:
        m = self.n if self.m is None else self.m
        if not (1 <= self.n <= MAX_SIZE and 1 <= m <= MAX_SIZE):
            raise ValueError(f"n and m must lie in [1, {MAX_SIZE}]")
        if self.low > self.high:
            raise ValueError("low must not exceed high")


def generate_instance(n: int, m: int | None = None, *, low: int = 0, high: int = 99, seed: int = 0, sense="min") -> AssignmentInstance:
    """Uniform integer weights in ``[low, high]``."""
    params = InstanceParams(n, m, low, high, sense)
    params.check()
    rng = np.random.default_rng(seed)
    w = rng.integers(low, high + 1, size=(n, n if m is None else m), dtype=np.int64)
    return AssignmentInstance(w, 1, Sense.parse(sense))


@dataclass(frozen=True)
class TopologyParams:
    n: int
    kind: str = "complete"
    p: float = 0.3
    loss: str = "0"

    def check(self) -> None:
        if not 1 <= self.n <= MAX_SIZE:
            raise ValueError(f"n must lie in [1, {MAX_SIZE}]")
        if self.kind not in ("complete", "ring", "line", "er"):
            raise ValueError(f"unknown topology kind {self.kind!r}")
        if not 0 <= self.p <= 1:
            raise ValueError("edge probability must lie in [0, 1]")


def generate_topology(n: int, kind: str = "complete", *, p: float = 0.3, loss="0", seed: int = 0) -> NetworkTopology:
    TopologyParams(n, kind, p, loss).check()
    if kind == "er":
        return NetworkTopology.erdos_renyi(n, p, seed=seed, loss=loss)
    return NetworkTopology.named(kind, n, loss=loss, seed=seed)


def generate(what: str, *, seed: int = 0, **params):
    """Dispatch to the generator for ``instance``, ``scenario`` or ``topology``."""
    if what == "instance":
        return generate_instance(seed=seed, **params)
    if what == "scenario":
        params.setdefault("mode", Mode.COMMIT)
        n = params.pop("n")
        m = params.pop("m", None) or n
        horizon = params.pop("horizon", 1)
        return generate_scenario(n, m, horizon, seed=seed, **params)
    if what == "topology":
        return generate_topology(seed=seed, **params)
    raise ValueError(f"unknown generator kind {what!r}")

