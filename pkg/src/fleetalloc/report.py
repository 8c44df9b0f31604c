"""Run reports: a canonical JSON body plus CSV sidecars."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


@dataclass
class RunReport:
    command: list[str]
    digest: str
    solver: str
    values: dict = field(default_factory=dict)
    certificate: dict = field(default_factory=dict)
    seed: int | None = None
    extra: dict = field(default_factory=dict)
    wall_time: float | None = None

    def body(self) -> dict:
        """Everything except wall time; identical inputs give identical bodies."""
        out = {
            "command": self.command,
            "digest": self.digest,
            "solver": self.solver,
            "values": self.values,
            "certificate": self.certificate,
            "seed": self.seed,
        }
        out.update(self.extra)
        return out

    def body_json(self) -> str:
        return json.dumps(self.body(), sort_keys=True, indent=2) + "\n"

    def to_json(self) -> str:
        out = self.body()
        if self.wall_time is not None:
            out["wall_time"] = round(self.wall_time, 6)
        return json.dumps(out, sort_keys=True, indent=2) + "\n"

    def write(self, path) -> None:
        try:
            Path(path).write_text(self.to_json())
        except OSError as exc:
            raise OSError(f"cannot write report {path}: {exc.strerror}") from None


def strip_wall_time(text: str) -> str:
    """Report body of an emitted report file."""
    obj = json.loads(text)
    obj.pop("wall_time", None)
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_csv(path, rows: Iterable[dict], fieldnames: list[str] | None = None) -> None:
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
