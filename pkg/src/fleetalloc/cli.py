"""Command-line front end: ``fleetalloc <command> ...``.

Every command prints a JSON report (or a short text form with
``--format text``). Failures print one ``ERR_<KIND>: message`` line on
stderr and exit with 2 (parse), 3 (infeasible), 4 (guard), 5 (protocol
non-convergence) or 1 (anything else).
"""

from __future__ import annotations

import argparse
import io as _stdio
import json
import shlex
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import io
from .distributed import run_cbaa, run_distributed_auction, run_lossy
from .dynamic import (
    clairvoyant_optimum,
    make_policy,
    per_period_variant_policy,
    run_scenario,
    summary,
    validate_trajectory,
)
from .errors import AssignmentError, InfeasibleError, ParseError
from .generate import generate
from .instance import (
    AssignmentInstance,
    Objective,
    Sense,
    objective_value,
    pad_to_square,
    to_fraction,
)
from .lap import solve_auction, solve_auction_scaled, solve_hungarian
from .oracle import brute_force
from .report import RunReport, write_csv
from .variants import (
    SemiAssignmentDemand,
    solve_apraq,
    solve_bottleneck,
    solve_fair_matching,
    solve_k_sum,
    solve_min_deviation,
    solve_semi_assignment,
    solve_with_side_constraints,
)

SPECIAL_OBJECTIVES = ("semi", "apraq", "sideconstrained")


class UsageError(ParseError):
    code = "ERR_USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _r(x: Fraction) -> str:
    return io.fmt_rational(Fraction(x))


def _pairs(pairs) -> list[list[int]]:
    return [[int(i), int(j)] for i, j in pairs]


def _rational_arg(text: str) -> Fraction:
    try:
        return to_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from None


# -- solve -----------------------------------------------------------------------


def _cost_total(square: AssignmentInstance, matching) -> Fraction:
    cost = square.as_cost_instance()
    return sum((cost.weight(i, j) for i, j in matching.pairs), Fraction(0))


def _lap(args, inst: AssignmentInstance):
    square = pad_to_square(inst)
    n = square.n_agents
    if args.method == "hungarian":
        matching, duals = solve_hungarian(square)
        extra = {}
    else:
        record = args.trace is not None
        if args.method == "auction":
            eps = args.epsilon if args.epsilon is not None else Fraction(1, n + 1)
            matching, duals, trace = solve_auction(square, eps, record_prices=record)
        else:
            matching, duals, trace = solve_auction_scaled(square, record_prices=record)
        extra = {"rounds": trace.rounds, "phase_rounds": list(trace.phase_rounds)}
        if record and trace.price_history:
            rows = [{"round": r + 1, **{f"p{j}": _r(p) for j, p in enumerate(row)}} for r, row in enumerate(trace.price_history)]
            write_csv(args.trace, rows)
    gap = _cost_total(square, matching) - duals.value()
    cert = {
        "dual_value": _r(duals.value()),
        "dual_gap": _r(gap),
        "epsilon": _r(duals.epsilon),
        "gap_bound": _r(n * duals.epsilon),
        "dual_feasible": duals.is_feasible(square),
        **extra,
    }
    real = matching.without_dummies(square)
    return real, objective_value(inst, real), cert


def _require_min(inst: AssignmentInstance, objective: str) -> None:
    if inst.sense is not Sense.MINIMIZE_COST:
        raise ValueError(f"objective {objective} expects a min (cost) instance")


def cmd_solve(args) -> RunReport:
    inst = io.parse_instance(args.instance)
    kind = args.objective
    cert: dict = {}
    values: dict = {"objective": kind}
    if kind in SPECIAL_OBJECTIVES:
        if kind == "semi":
            if args.demand is None:
                raise ValueError("objective semi needs --demand")
            demand = io.parse_demand(args.demand, inst.n_tasks)
            sap = solve_semi_assignment(inst, demand)
            pairs, value = sap.pairs(), sap.value
        elif kind == "apraq":
            matching = solve_apraq(inst)
            pairs, value = matching.pairs, objective_value(inst, matching)
        else:
            if args.resources is None:
                raise ValueError("objective sideconstrained needs --resources")
            cons = io.parse_resources(args.resources, inst.shape)
            square = pad_to_square(inst)
            matching = solve_with_side_constraints(square, cons).without_dummies(square)
            pairs, value = matching.pairs, objective_value(inst, matching)
            cert["consumption"] = [_r(c) for c in cons.consumption(pairs)]
            cert["budgets"] = [_r(b) for b in cons.budgets]
        solver = kind
    else:
        objective = Objective.parse(kind)
        values["objective"] = str(objective)
        if objective.kind == "sum":
            matching, value, cert = _lap(args, inst)
            solver = args.method
        else:
            _require_min(inst, kind)
            square = pad_to_square(inst)
            if objective.kind == "bottleneck":
                res = solve_bottleneck(square)
                matching = res.matching
                cert["feasibility_probes"] = res.feasibility_probes
            elif objective.kind == "spread":
                matching = solve_fair_matching(square)[0]
            elif objective.kind == "mindev":
                matching = solve_min_deviation(square)[0]
            else:
                matching = solve_k_sum(square, objective.k)[0]
            matching = matching.without_dummies(square)
            value = objective_value(inst, matching, objective)
            solver = objective.kind
        pairs = matching.pairs
    values["value"] = _r(value)
    return RunReport([], io.digest(inst), solver, values, cert, extra={"matching": _pairs(pairs)})


# -- oracle ----------------------------------------------------------------------


def cmd_oracle(args) -> RunReport:
    inst = io.parse_instance(args.instance)
    kind = args.objective
    kwargs: dict = {}
    objective = Objective.parse("sum") if kind in SPECIAL_OBJECTIVES else Objective.parse(kind)
    if kind == "semi":
        if args.demand is None:
            raise ValueError("objective semi needs --demand")
        kwargs["demand"] = io.parse_demand(args.demand, inst.n_tasks).d
    elif kind == "apraq":
        kwargs["qualification"] = True
    elif kind == "sideconstrained":
        if args.resources is None:
            raise ValueError("objective sideconstrained needs --resources")
        kwargs["constraints"] = io.parse_resources(args.resources, inst.shape)
    res = brute_force(inst, objective, **kwargs)
    if res.best_value is None:
        raise InfeasibleError("infeasible: no feasible candidate")
    optima = res.best_matchings if args.all_optima else res.best_matchings[:1]
    values = {"objective": kind if kind in SPECIAL_OBJECTIVES else str(objective), "value": _r(res.best_value)}
    extra = {"matching": _pairs(res.best_matchings[0]), "enumerated": res.enumerated}
    if args.all_optima:
        extra["optima"] = [_pairs(m) for m in optima]
    return RunReport([], io.digest(inst), "oracle", values, {}, extra=extra)


# -- simulate --------------------------------------------------------------------


def cmd_simulate(args) -> RunReport:
    inst = io.parse_instance(args.instance)
    topo = io.parse_topology(args.topology)
    extra: dict = {"topology": io.digest(topo), "diameter": topo.diameter}
    if topo.loss_probability:
        if args.max_rounds is None:
            raise ValueError("lossy simulation needs --max-rounds")
        out = run_lossy(args.protocol, inst, topo, args.max_rounds, epsilon=args.epsilon)
        logs = out.logs
        values = out.as_dict()
        values.pop("protocol")
        matching_pairs = None
    else:
        if args.protocol == "dauction":
            eps = args.epsilon if args.epsilon is not None else Fraction(1, inst.n_agents + 1)
            res = run_distributed_auction(inst, topo, eps, max_rounds=args.max_rounds)
            extra["prices"] = [_r(p) for p in res.prices]
            extra["epsilon"] = _r(eps)
        else:
            res = run_cbaa(inst, topo, sync=not args.asynchronous, max_rounds=args.max_rounds)
        logs = res.logs
        matching_pairs = res.matching.pairs
        values = {
            "value": _r(objective_value(inst, res.matching)) if len(res.matching) else "0",
            "converged": res.converged,
            "rounds": res.rounds,
            "conflicts_open": res.conflicts_open,
        }
    values["messages_sent"] = sum(r.messages_sent for r in logs)
    values["messages_dropped"] = sum(r.messages_dropped for r in logs)
    if matching_pairs is not None:
        extra["matching"] = _pairs(matching_pairs)
    if args.log:
        Path(args.log).write_text("".join(json.dumps(r.as_dict(), sort_keys=True) + "\n" for r in logs))
    return RunReport([], io.digest(inst), args.protocol, values, {}, seed=topo.seed, extra=extra)


# -- run-scenario ----------------------------------------------------------------


def _scenario_policy(args, scenario):
    name = args.policy
    if name == "sideconstrained" or args.resources:
        cons = io.parse_resources(args.resources, (scenario.n_agents, scenario.n_tasks))
        return per_period_variant_policy(cons)
    if name == "semi":
        if scenario.demand is None:
            raise ValueError("policy semi needs a scenario with demands")
        return per_period_variant_policy(SemiAssignmentDemand(scenario.demand))
    return make_policy(name)


def cmd_run_scenario(args) -> RunReport:
    scenario = io.parse_scenario(args.scenario)
    policy = _scenario_policy(args, scenario)
    traj = run_scenario(scenario, policy)
    report = validate_trajectory(scenario, traj)
    clair = clairvoyant_optimum(scenario) if args.clairvoyant else None
    values = summary(scenario, traj, clair)
    cert = {name: fam.passed for name, fam in report.families.items()}
    if args.csv:
        write_csv(args.csv, traj.period_rows(), ["period", "assignments", "period_value", "stranded_tasks"])
    if args.trajectory:
        Path(args.trajectory).write_text(io.dump_json(io.trajectory_to_obj(traj)))
    extra = {"per_period_values": [_r(v) for v in traj.per_period_values]}
    if traj.per_period_objective:
        extra["per_period_objective"] = [None if v is None else _r(v) for v in traj.per_period_objective]
    return RunReport([], io.digest(scenario), policy.name, values, cert, seed=scenario.seed, extra=extra)


# -- generate / validate -----------------------------------------------------------


def cmd_generate(args) -> RunReport:
    if args.kind == "instance":
        obj = generate("instance", seed=args.seed, n=args.n, m=args.m, low=args.low, high=args.high, sense=args.sense or "min")
        io.emit_instance(obj, args.out)
        extra = {"shape": list(obj.shape)}
    elif args.kind == "scenario":
        obj = generate(
            "scenario", seed=args.seed, n=args.n, m=args.m, horizon=args.horizon,
            low=args.low, high=args.high, sense=args.sense or "max", mode=args.mode,
        )
        io.emit_scenario(obj, args.out)
        extra = {"horizon": obj.horizon}
    else:
        obj = generate("topology", seed=args.seed, n=args.n, kind=args.topology, p=args.p, loss=args.loss)
        io.emit_topology(obj, args.out)
        extra = {"diameter": obj.diameter}
    return RunReport([], io.digest(obj), f"generate-{args.kind}", {"path": str(args.out)}, {}, seed=args.seed, extra=extra)


def cmd_validate(args) -> RunReport:
    kind = args.kind
    if args.trajectory:
        scenario = io.parse_scenario(args.path)
        traj = io.parse_trajectory(args.trajectory)
        rep = validate_trajectory(scenario, traj)
        families = {
            name: {"passed": f.passed, "first_violation": None if f.first_violation is None else list(f.first_violation)}
            for name, f in rep.families.items()
        }
        out = RunReport([], io.digest(scenario), "validate-trajectory", {"passed": rep.passed}, families)
        if not rep.passed:
            out.extra["error"] = f"failed families: {', '.join(rep.failed())}"
        return out
    if kind == "auto":
        kind = "instance"
        if str(args.path).endswith(".json"):
            text = Path(args.path).read_text()
            try:
                keys = set(json.loads(text))
            except (json.JSONDecodeError, TypeError):
                keys = set()
            kind = "scenario" if "horizon" in keys else "topology" if "edges" in keys else "instance"
    parsers = {
        "instance": io.parse_instance,
        "scenario": io.parse_scenario,
        "topology": io.parse_topology,
        "demand": io.parse_demand,
        "resources": io.parse_resources,
    }
    obj = parsers[kind](args.path)
    dig = io.digest(obj) if kind in ("instance", "scenario", "topology") else io.digest(repr(obj))
    return RunReport([], dig, f"validate-{kind}", {"passed": True}, {})


# -- plumbing ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fleetalloc", description="Assignment solvers, dynamic fleet simulation and distributed protocols.")
    p.add_argument("--batch", metavar="LIST", help="file with one command per line; entries run concurrently")
    p.add_argument("--jobs", type=int, default=4, help="worker threads for --batch")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help="also write the JSON report here")
        sp.add_argument("--format", choices=("json", "text"), default="json")

    objectives = "sum, bottleneck, fair, mindev, ksum:<k>, semi, apraq, sideconstrained"
    s = sub.add_parser("solve", help="solve a static instance")
    s.add_argument("instance")
    s.add_argument("--objective", default="sum", help=objectives)
    s.add_argument("--method", choices=("hungarian", "auction", "auction-scaled"), default="hungarian")
    s.add_argument("--epsilon", type=_rational_arg)
    s.add_argument("--trace", help="CSV of auction prices per round")
    s.add_argument("--demand")
    s.add_argument("--resources")
    common(s)
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="brute-force optimum")
    o.add_argument("instance")
    o.add_argument("--objective", default="sum", help=objectives)
    o.add_argument("--all-optima", action="store_true")
    o.add_argument("--demand")
    o.add_argument("--resources")
    common(o)
    o.set_defaults(func=cmd_oracle)

    m = sub.add_parser("simulate", help="run a distributed protocol")
    m.add_argument("--protocol", choices=("dauction", "cbaa"), required=True)
    m.add_argument("--instance", required=True)
    m.add_argument("--topology", required=True)
    m.add_argument("--epsilon", type=_rational_arg)
    m.add_argument("--max-rounds", type=int)
    m.add_argument("--log", help="JSON-lines round log")
    m.add_argument("--async", dest="asynchronous", action="store_true", help="CBAA with seeded random bidding activity")
    common(m)
    m.set_defaults(func=cmd_simulate)

    r = sub.add_parser("run-scenario", help="run a dynamic scenario under a policy")
    r.add_argument("scenario")
    r.add_argument("--policy", default="myopic", help="null, myopic, greedy, semi, sideconstrained or an objective")
    r.add_argument("--resources")
    r.add_argument("--clairvoyant", action="store_true", help="also compute the offline optimum and regret")
    r.add_argument("--csv", help="per-period CSV")
    r.add_argument("--trajectory", help="write the trajectory as JSON")
    common(r)
    r.set_defaults(func=cmd_run_scenario)

    g = sub.add_parser("generate", help="write a seeded random instance, scenario or topology")
    g.add_argument("kind", choices=("instance", "scenario", "topology"))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--horizon", type=int, default=1)
    g.add_argument("--low", type=int, default=0)
    g.add_argument("--high", type=int, default=99)
    g.add_argument("--sense")
    g.add_argument("--mode", choices=("commit", "reassign"), default="commit")
    g.add_argument("--topology", choices=("complete", "ring", "line", "er"), default="complete")
    g.add_argument("--p", type=float, default=0.3)
    g.add_argument("--loss", default="0")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--format", choices=("json", "text"), default="json")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", help="check a file, or a trajectory against its scenario")
    v.add_argument("path")
    v.add_argument("--kind", choices=("auto", "instance", "scenario", "topology", "demand", "resources"), default="auto")
    v.add_argument("--trajectory")
    common(v)
    v.set_defaults(func=cmd_validate)
    return p


def _text(report: RunReport) -> str:
    lines = [f"solver: {report.solver}"]
    lines += [f"{k}: {v}" for k, v in sorted(report.values.items())]
    if "matching" in report.extra:
        lines.append("matching: " + " ".join(f"{i}-{j}" for i, j in report.extra["matching"]))
    lines += [f"{k}: {v}" for k, v in sorted(report.certificate.items())]
    return "\n".join(lines) + "\n"


def _error_line(exc: BaseException) -> tuple[int, str]:
    if isinstance(exc, AssignmentError):
        return exc.exit_code, f"{exc.code}: {exc}"
    if isinstance(exc, OSError):
        return 1, f"ERR_IO: {exc}"
    return 1, f"ERR_USAGE: {exc}"


def run(argv: list[str]) -> tuple[int, str, str]:
    """Execute one command; returns (exit code, stdout text, stderr text)."""
    try:
        args = build_parser().parse_args(argv)
        if args.batch:
            return _run_batch(args.batch, args.jobs)
        if args.command is None:
            raise UsageError("missing command (solve, oracle, simulate, run-scenario, generate, validate)")
        start = time.perf_counter()
        report = args.func(args)
        report.command = list(argv)
        report.wall_time = time.perf_counter() - start
        if getattr(args, "out", None) and args.command != "generate":
            report.write(args.out)
        text = _text(report) if args.format == "text" else report.to_json()
        error = report.extra.get("error")
        if error:
            return 1, text, f"ERR_CONSTRAINT: {error}\n"
        return 0, text, ""
    except (AssignmentError, ValueError, TypeError, OSError, KeyError) as exc:
        code, line = _error_line(exc)
        return code, "", " ".join(line.split()) + "\n"


def _run_batch(path: str, jobs: int) -> tuple[int, str, str]:
    try:
        entries = [ln.strip() for ln in Path(path).read_text().splitlines()]
    except OSError as exc:
        return 1, "", f"ERR_IO: {exc}\n"
    entries = [e for e in entries if e and not e.startswith("#")]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda e: run(shlex.split(e)), entries))
    out = _stdio.StringIO()
    worst = 0
    for k, (entry, (code, stdout, stderr)) in enumerate(zip(entries, results)):
        out.write(f"== [{k}] exit={code} {entry}\n{stdout}{stderr}")
        worst = max(worst, code)
    return worst, out.getvalue(), ""


def main(argv: list[str] | None = None) -> int:
    code, stdout, stderr = run(sys.argv[1:] if argv is None else argv)
    sys.stdout.write(stdout)
    sys.stderr.write(stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
