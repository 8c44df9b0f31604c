"""Readers and writers for instance, demand, resource, scenario and topology files.

Instance text format::

    # comment
    2 2 min
    1 2
    4 3
    QUAL
    1 1
    0 1
    FORBID
    0 1

Files ending in ``.json`` hold the same content as a JSON object.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .distributed import NetworkTopology
from .dynamic import Mode, Scenario
from .errors import ParseError
from .instance import AssignmentInstance, Sense, SideConstraintSet, scale_rationals
from .variants import SemiAssignmentDemand

BLOCKS = ("QUAL", "FORBID")


def fmt_rational(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _json_number(x: Fraction):
    return x.numerator if x.denominator == 1 else fmt_rational(x)


def _rational(token, line: int | None = None) -> Fraction:
    if isinstance(token, bool):
        raise ParseError(f"not a rational: {token!r}", line)
    if isinstance(token, int):
        return Fraction(token)
    if isinstance(token, float):
        raise ParseError(f"floating-point value {token!r}; write it as a string or fraction", line)
    try:
        return Fraction(str(token).strip())
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"not a rational: {token!r}", line) from None


def _sense(token, line: int | None = None) -> Sense:
    try:
        return Sense.parse(token)
    except ValueError:
        raise ParseError(f"unknown sense {token!r} (use min or max)", line) from None


def _lines(text: str) -> list[tuple[int, list[str]]]:
    out = []
    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            out.append((no, body.split()))
    return out


def _count(token: str, what: str, line: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise ParseError(f"{what} must be an integer, got {token!r}", line) from None
    if value < 1:
        raise ParseError(f"{what} must be positive, got {value}", line)
    return value


# -- instances -----------------------------------------------------------------


def parse_instance_text(text: str) -> AssignmentInstance:
    lines = _lines(text)
    if not lines:
        raise ParseError("empty instance file", 1)
    no, head = lines[0]
    if len(head) != 3:
        raise ParseError("header must be 'n m sense'", no)
    n, m = _count(head[0], "n", no), _count(head[1], "m", no)
    sense = _sense(head[2], no)
    if len(lines) < 1 + n:
        raise ParseError(f"expected {n} weight rows, found {len(lines) - 1}", lines[-1][0])
    weights = []
    for no, toks in lines[1 : 1 + n]:
        if toks[0] in BLOCKS:
            raise ParseError(f"expected {n} weight rows before {toks[0]}", no)
        if len(toks) != m:
            raise ParseError(f"row has {len(toks)} entries, expected {m}", no)
        weights.append([_rational(t, no) for t in toks])
    qual = None
    forbidden = np.zeros((n, m), dtype=bool)
    seen: set[str] = set()
    k = 1 + n
    while k < len(lines):
        no, toks = lines[k]
        name = toks[0]
        if name not in BLOCKS or len(toks) != 1:
            raise ParseError(f"unknown block {' '.join(toks)!r}", no)
        if name in seen:
            raise ParseError(f"duplicate {name} block", no)
        seen.add(name)
        k += 1
        if name == "QUAL":
            rows = lines[k : k + n]
            if len(rows) < n:
                raise ParseError(f"QUAL block needs {n} rows", no)
            qual = np.zeros((n, m), dtype=bool)
            for r, (rno, rtoks) in enumerate(rows):
                if len(rtoks) != m or any(t not in ("0", "1") for t in rtoks):
                    raise ParseError(f"QUAL row must hold {m} entries of 0/1", rno)
                qual[r] = [t == "1" for t in rtoks]
            k += n
        else:
            while k < len(lines) and lines[k][1][0] not in BLOCKS:
                fno, ftoks = lines[k]
                if len(ftoks) != 2:
                    raise ParseError("FORBID entries are 'i j'", fno)
                try:
                    i, j = int(ftoks[0]), int(ftoks[1])
                except ValueError:
                    raise ParseError("FORBID entries are integer pairs", fno) from None
                if not (0 <= i < n and 0 <= j < m):
                    raise ParseError(f"FORBID pair {(i, j)} outside {n}x{m}", fno)
                forbidden[i, j] = True
                k += 1
    return AssignmentInstance.from_matrix(weights, sense, qual, forbidden)


def _instance_from_obj(obj: dict) -> AssignmentInstance:
    allowed = {"n", "m", "sense", "weights", "qualification", "forbidden"}
    if not isinstance(obj, dict):
        raise ParseError("instance document must be an object")
    extra = set(obj) - allowed
    if extra:
        raise ParseError(f"unknown keys {sorted(extra)}")
    try:
        rows = obj["weights"]
    except KeyError:
        raise ParseError("missing 'weights'") from None
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ParseError("'weights' must be a non-empty list of rows")
    n, m = len(rows), len(rows[0])
    if obj.get("n", n) != n or obj.get("m", m) != m:
        raise ParseError(f"declared shape {obj.get('n')}x{obj.get('m')} disagrees with weights {n}x{m}")
    for r, row in enumerate(rows):
        if len(row) != m:
            raise ParseError(f"weights row {r} has {len(row)} entries, expected {m}")
    weights = [[_rational(x) for x in row] for row in rows]
    qual = obj.get("qualification")
    if qual is not None:
        qual = np.asarray(qual)
        if qual.shape != (n, m) or not np.isin(qual, (0, 1)).all():
            raise ParseError(f"qualification must be a {n}x{m} 0/1 matrix")
        qual = qual.astype(bool)
    forbidden = np.zeros((n, m), dtype=bool)
    for pair in obj.get("forbidden", []):
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(v, int) for v in pair)):
            raise ParseError(f"forbidden entries are [i, j] pairs, got {pair!r}")
        i, j = pair
        if not (0 <= i < n and 0 <= j < m):
            raise ParseError(f"forbidden pair {(i, j)} outside {n}x{m}")
        forbidden[i, j] = True
    return AssignmentInstance.from_matrix(weights, _sense(obj.get("sense", "min")), qual, forbidden)


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from None


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None


def _is_json(path) -> bool:
    return str(path).lower().endswith(".json")


def parse_instance(path) -> AssignmentInstance:
    text = _read(path)
    if _is_json(path):
        return _instance_from_obj(_load_json(text))
    return parse_instance_text(text)


def instance_to_obj(instance: AssignmentInstance) -> dict:
    obj = {
        "n": instance.n_agents,
        "m": instance.n_tasks,
        "sense": instance.sense.value,
        "weights": [[_json_number(Fraction(int(x), instance.scale)) for x in row] for row in instance.numer.tolist()],
        "forbidden": [[int(i), int(j)] for i, j in zip(*np.nonzero(instance.forbidden))],
    }
    if instance.qualification is not None:
        obj["qualification"] = instance.qualification.astype(int).tolist()
    return obj


def emit_instance_text(instance: AssignmentInstance) -> str:
    out = [f"{instance.n_agents} {instance.n_tasks} {instance.sense.value}"]
    for row in instance.numer.tolist():
        out.append(" ".join(fmt_rational(Fraction(int(x), instance.scale)) for x in row))
    if instance.qualification is not None:
        out.append("QUAL")
        out.extend(" ".join(str(int(b)) for b in row) for row in instance.qualification)
    if instance.forbidden.any():
        out.append("FORBID")
        out.extend(f"{i} {j}" for i, j in zip(*np.nonzero(instance.forbidden)))
    return "\n".join(out) + "\n"


def emit_instance(instance: AssignmentInstance, path) -> None:
    text = dump_json(instance_to_obj(instance)) if _is_json(path) else emit_instance_text(instance)
    Path(path).write_text(text)


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def digest(obj) -> str:
    """Content hash of an instance, scenario, topology or JSON-able object."""
    if isinstance(obj, AssignmentInstance):
        obj = instance_to_obj(obj)
    elif isinstance(obj, Scenario):
        obj = scenario_to_obj(obj)
    elif isinstance(obj, NetworkTopology):
        obj = topology_to_obj(obj)
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canon.encode()).hexdigest()[:16]


# -- demand and resources ------------------------------------------------------


def parse_demand(path, n_categories: int | None = None) -> SemiAssignmentDemand:
    """Demand vector: whitespace-separated positive integers, or ``{"demand": [...]}``."""
    text = _read(path)
    if _is_json(path):
        obj = _load_json(text)
        values = obj.get("demand") if isinstance(obj, dict) else obj
        if not isinstance(values, list) or not all(isinstance(v, int) for v in values):
            raise ParseError("demand must be a list of integers")
        line = None
    else:
        lines = _lines(text)
        if not lines:
            raise ParseError("empty demand file", 1)
        values, line = [], lines[0][0]
        for no, toks in lines:
            for t in toks:
                values.append(_count(t, "demand", no))
    if n_categories is not None and len(values) != n_categories:
        raise ParseError(f"demand has {len(values)} entries for {n_categories} categories", line)
    try:
        return SemiAssignmentDemand(tuple(values))
    except ValueError as exc:
        raise ParseError(str(exc), line) from None


def parse_resources(path, shape: tuple[int, int] | None = None) -> SideConstraintSet:
    """Resource budgets.

    Text form: one ``RESOURCE <budget>`` line per resource followed by its
    usage rows. JSON form: ``{"resources": [{"budget": b, "usage": [[...]]}]}``.
    """
    text = _read(path)
    usage, budgets = [], []
    if _is_json(path):
        obj = _load_json(text)
        items = obj.get("resources") if isinstance(obj, dict) else None
        if not isinstance(items, list) or not items:
            raise ParseError("expected a non-empty 'resources' list")
        for item in items:
            if not isinstance(item, dict) or set(item) != {"budget", "usage"}:
                raise ParseError("each resource needs exactly 'budget' and 'usage'")
            budgets.append(_rational(item["budget"]))
            usage.append([[_rational(x) for x in row] for row in item["usage"]])
    else:
        current = None
        for no, toks in _lines(text):
            if toks[0] == "RESOURCE":
                if len(toks) != 2:
                    raise ParseError("expected 'RESOURCE <budget>'", no)
                budgets.append(_rational(toks[1], no))
                current = []
                usage.append(current)
            elif current is None:
                raise ParseError("usage row before any RESOURCE line", no)
            else:
                if shape is not None and len(toks) != shape[1]:
                    raise ParseError(f"usage row has {len(toks)} entries, expected {shape[1]}", no)
                current.append([_rational(t, no) for t in toks])
        if not budgets:
            raise ParseError("no RESOURCE block", 1)
    for k, mat in enumerate(usage):
        if shape is not None and (len(mat) != shape[0] or any(len(r) != shape[1] for r in mat)):
            raise ParseError(f"resource {k} usage is not {shape[0]}x{shape[1]}")
    try:
        return SideConstraintSet(tuple(tuple(tuple(r) for r in mat) for mat in usage), tuple(budgets))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def emit_resources(constraints: SideConstraintSet) -> str:
    out = []
    for mat, b in zip(constraints.usage, constraints.budgets):
        out.append(f"RESOURCE {fmt_rational(b)}")
        out.extend(" ".join(fmt_rational(x) for x in row) for row in mat)
    return "\n".join(out) + "\n"


# -- scenarios -----------------------------------------------------------------


def _arrivals(items, key: str) -> tuple[int | None, ...]:
    if not isinstance(items, list) or not items:
        raise ParseError(f"'{key}' must be a non-empty list")
    arrivals: dict[int, int | None] = {}
    for item in items:
        if not isinstance(item, dict) or "id" not in item:
            raise ParseError(f"each entry of '{key}' needs an 'id'")
        ident, arrival = item["id"], item.get("arrival")
        if not isinstance(ident, int) or ident in arrivals:
            raise ParseError(f"bad or duplicate id {ident!r} in '{key}'")
        if arrival is not None and not isinstance(arrival, int):
            raise ParseError(f"arrival of {key[:-1]} {ident} must be an integer period")
        arrivals[ident] = arrival
    if sorted(arrivals) != list(range(len(arrivals))):
        raise ParseError(f"'{key}' ids must be 0..{len(arrivals) - 1}")
    return tuple(arrivals[i] for i in range(len(arrivals)))


def _pair_matrix(items, n: int, m: int, key: str) -> np.ndarray:
    out = np.ones((n, m), dtype=np.int64)
    for item in items:
        try:
            i, j, v = item["agent"], item["task"], item["value"]
        except (KeyError, TypeError):
            raise ParseError(f"'{key}' entries need agent, task and value") from None
        if not (0 <= i < n and 0 <= j < m) or not isinstance(v, int) or v < 1:
            raise ParseError(f"bad '{key}' entry {item!r}")
        out[i, j] = v
    return out


def scenario_from_obj(obj: dict) -> Scenario:
    allowed = {
        "horizon", "agents", "tasks", "utilities", "mode", "sense", "seed",
        "eta", "service_durations", "demand", "qualification",
    }
    if not isinstance(obj, dict):
        raise ParseError("scenario document must be an object")
    extra = set(obj) - allowed
    if extra:
        raise ParseError(f"unknown keys {sorted(extra)}")
    horizon = obj.get("horizon")
    if not isinstance(horizon, int) or horizon < 1:
        raise ParseError("'horizon' must be a positive integer")
    agents = _arrivals(obj.get("agents"), "agents")
    tasks = _arrivals(obj.get("tasks"), "tasks")
    n, m = len(agents), len(tasks)
    values = [[[Fraction(0)] * m for _ in range(n)] for _ in range(horizon)]
    for item in obj.get("utilities", []):
        try:
            i, j, t, v = item["agent"], item["task"], item["period"], item["value"]
        except (KeyError, TypeError):
            raise ParseError("utility entries need agent, task, period and value") from None
        if not (0 <= i < n and 0 <= j < m and 1 <= t <= horizon):
            raise ParseError(f"utility entry out of range: {item!r}")
        values[t - 1][i][j] = _rational(v)
    flat = [v for period in values for row in period for v in row]
    numer, scale = scale_rationals(flat, (horizon, n, m))
    mode = obj.get("mode", "commit")
    if mode not in ("commit", "reassign"):
        raise ParseError(f"unknown mode {mode!r}")
    kwargs = {
        "sense": _sense(obj.get("sense", "max")),
        "mode": Mode(mode),
        "seed": obj.get("seed"),
        "demand": tuple(obj["demand"]) if obj.get("demand") is not None else None,
    }
    if obj.get("eta") is not None:
        kwargs["eta"] = _pair_matrix(obj["eta"], n, m, "eta")
    if obj.get("service_durations") is not None:
        kwargs["service_durations"] = _pair_matrix(obj["service_durations"], n, m, "service_durations")
    if obj.get("qualification") is not None:
        kwargs["qualification"] = np.asarray(obj["qualification"], dtype=bool)
    try:
        return Scenario(horizon, agents, tasks, numer, scale, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ParseError(str(exc)) from None


def scenario_to_obj(scenario: Scenario) -> dict:
    n, m = scenario.n_agents, scenario.n_tasks
    utilities = [
        {"agent": i, "task": j, "period": t + 1, "value": _json_number(Fraction(int(v), scenario.scale))}
        for t in range(scenario.horizon)
        for i in range(n)
        for j in range(m)
        if (v := scenario.numer[t, i, j]) != 0
    ]
    obj = {
        "horizon": scenario.horizon,
        "agents": [{"id": i, "arrival": a} for i, a in enumerate(scenario.agent_arrivals)],
        "tasks": [{"id": j, "arrival": a} for j, a in enumerate(scenario.task_arrivals)],
        "utilities": utilities,
        "mode": scenario.mode.value,
        "sense": scenario.sense.value,
        "seed": scenario.seed,
    }
    for key in ("eta", "service_durations"):
        mat = getattr(scenario, key)
        if mat is not None:
            obj[key] = [{"agent": i, "task": j, "value": int(mat[i, j])} for i in range(n) for j in range(m)]
    if scenario.demand is not None:
        obj["demand"] = list(scenario.demand)
    if scenario.qualification is not None:
        obj["qualification"] = scenario.qualification.astype(int).tolist()
    return obj


def parse_scenario(path) -> Scenario:
    return scenario_from_obj(_load_json(_read(path)))


def emit_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(dump_json(scenario_to_obj(scenario)))


# -- topologies ----------------------------------------------------------------


def topology_from_obj(obj: dict) -> NetworkTopology:
    if not isinstance(obj, dict) or "n" not in obj or "edges" not in obj:
        raise ParseError("topology needs 'n' and 'edges'")
    extra = set(obj) - {"n", "edges", "loss", "seed"}
    if extra:
        raise ParseError(f"unknown keys {sorted(extra)}")
    n = obj["n"]
    if not isinstance(n, int) or n < 1:
        raise ParseError("'n' must be a positive integer")
    try:
        return NetworkTopology.from_edges(
            n, [tuple(e) for e in obj["edges"]], loss=_rational(obj.get("loss", 0)), seed=int(obj.get("seed", 0))
        )
    except (ValueError, TypeError) as exc:
        raise ParseError(str(exc)) from None


def topology_to_obj(topology: NetworkTopology) -> dict:
    return {
        "n": topology.n_nodes,
        "edges": [list(e) for e in topology.edges()],
        "loss": _json_number(topology.loss_probability),
        "seed": topology.seed,
    }


def parse_topology(path) -> NetworkTopology:
    return topology_from_obj(_load_json(_read(path)))


def emit_topology(topology: NetworkTopology, path) -> None:
    Path(path).write_text(dump_json(topology_to_obj(topology)))


# -- trajectories --------------------------------------------------------------


def trajectory_to_obj(trajectory) -> dict:
    return {
        "policy": trajectory.policy,
        "decisions": [[list(p) for p in period] for period in trajectory.decisions],
        "pending": [[list(p) for p in period] for period in trajectory.pending],
        "per_period_values": [fmt_rational(v) for v in trajectory.per_period_values],
        "per_period_objective": [None if v is None else fmt_rational(v) for v in trajectory.per_period_objective],
        "total": fmt_rational(trajectory.total),
        "alpha": [list(r) for r in trajectory.alpha],
        "beta": [list(r) for r in trajectory.beta],
        "agent_arrivals": list(trajectory.agent_arrivals),
        "agent_origin": list(trajectory.agent_origin),
        "stranded": list(trajectory.stranded),
    }


def trajectory_from_obj(obj: dict):
    from .dynamic import Trajectory

    try:
        return Trajectory(
            decisions=tuple(tuple(tuple(p) for p in period) for period in obj["decisions"]),
            per_period_values=tuple(_rational(v) for v in obj["per_period_values"]),
            total=_rational(obj["total"]),
            alpha=tuple(tuple(r) for r in obj["alpha"]),
            beta=tuple(tuple(r) for r in obj["beta"]),
            agent_arrivals=tuple(obj["agent_arrivals"]),
            agent_origin=tuple(obj["agent_origin"]),
            pending=tuple(tuple(tuple(p) for p in period) for period in obj.get("pending", [])),
            stranded=tuple(obj.get("stranded", [])),
            policy=obj.get("policy", ""),
            per_period_objective=tuple(
                None if v is None else _rational(v) for v in obj.get("per_period_objective", [])
            ),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed trajectory: {exc}") from None


def parse_trajectory(path):
    return trajectory_from_obj(_load_json(_read(path)))
