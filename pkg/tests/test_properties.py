"""Property-based checks of the solver, simulator and I/O invariants."""

from fractions import Fraction
from itertools import permutations

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from fleetalloc import io
from fleetalloc.distributed import (
    NetworkTopology,
    greedy_sequential,
    run_cbaa,
    run_lossy,
)
from fleetalloc.dynamic import (
    GreedyPolicy,
    MyopicPolicy,
    clairvoyant_optimum,
    expand_renewals,
    generate_scenario,
    run_scenario,
    validate_trajectory,
)
from fleetalloc.errors import InfeasibleError
from fleetalloc.instance import (
    BOTTLENECK,
    SPREAD,
    SUM,
    AssignmentInstance,
    Matching,
    Objective,
    SideConstraintSet,
    ksum,
    objective_value,
    pad_to_square,
)
from fleetalloc.lap import solve_auction, solve_hungarian
from fleetalloc.oracle import brute_force
from fleetalloc.variants import (
    lap_bound,
    solve_bottleneck,
    solve_fair_matching,
    solve_k_sum,
    solve_semi_assignment,
    solve_with_side_constraints,
)

I = AssignmentInstance.from_matrix
SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def matrices(draw, min_n=1, max_n=5, square=True, low=0, high=20):
    n = draw(st.integers(min_n, max_n))
    m = n if square else draw(st.integers(min_n, max_n))
    rows = draw(st.lists(st.lists(st.integers(low, high), min_size=m, max_size=m), min_size=n, max_size=n))
    return np.array(rows, dtype=np.int64)


@st.composite
def rational_matrices(draw, max_n=4):
    n = draw(st.integers(1, max_n))
    frac = st.fractions(min_value=-10, max_value=10, max_denominator=7)
    return [[draw(frac) for _ in range(n)] for _ in range(n)]


@SETTINGS
@given(matrices(), st.data())
def test_objective_permutation_stable(w, data):
    inst = I(w)
    n = len(w)
    perm = data.draw(st.permutations(range(n)))
    pairs = list(enumerate(perm))
    shuffled = data.draw(st.permutations(pairs))
    for obj in (SUM, BOTTLENECK, SPREAD, ksum(max(1, n // 2))):
        assert objective_value(inst, Matching(tuple(pairs)), obj) == objective_value(inst, Matching(tuple(shuffled)), obj)


@SETTINGS
@given(matrices(), st.data())
def test_ksum_extremes_on_any_perfect_matching(w, data):
    inst = I(w)
    n = len(w)
    m = Matching(tuple(enumerate(data.draw(st.permutations(range(n))))))
    assert objective_value(inst, m, ksum(1)) == objective_value(inst, m, BOTTLENECK)
    assert objective_value(inst, m, ksum(n)) == objective_value(inst, m, SUM)


@SETTINGS
@given(matrices(square=False, max_n=5))
def test_padding_preserves_optimum(w):
    inst = I(w)
    sq = pad_to_square(inst)
    m, _ = solve_hungarian(sq)
    assert objective_value(inst, m.without_dummies(sq)) == brute_force(inst).best_value


@SETTINGS
@given(rational_matrices())
def test_hungarian_strong_duality(rows):
    inst = I(rows)
    m, duals = solve_hungarian(inst)
    assert duals.value() == objective_value(inst, m)
    assert duals.is_feasible(inst)
    assert not duals.cs_violations(inst, m)
    assert objective_value(inst, m) == brute_force(inst).best_value


@SETTINGS
@given(matrices(max_n=5), st.fractions(min_value=Fraction(1, 9), max_value=12, max_denominator=9))
def test_auction_bound_and_monotone_prices(w, eps):
    inst = I(w)
    n = len(w)
    m, duals, trace = solve_auction(inst, eps, record_prices=True)
    assert objective_value(inst, m) - brute_force(inst).best_value <= n * eps
    assert not duals.cs_violations(inst, m)
    hist = np.array(trace.price_history, dtype=object)
    if len(hist) > 1:
        assert (np.diff(hist, axis=0) >= 0).all()


@SETTINGS
@given(matrices(max_n=5), st.data())
def test_bottleneck_monotone_under_lowering(w, data):
    n = len(w)
    i, j = data.draw(st.integers(0, n - 1)), data.draw(st.integers(0, n - 1))
    lowered = w.copy()
    lowered[i, j] = data.draw(st.integers(-5, int(w[i, j])))
    assert solve_bottleneck(I(lowered)).threshold <= solve_bottleneck(I(w)).threshold


@SETTINGS
@given(matrices(max_n=5))
def test_fair_band_is_narrowest(w):
    inst = I(w)
    _, spread = solve_fair_matching(inst)
    n = len(w)
    for perm in permutations(range(n)):
        vals = [int(w[i, perm[i]]) for i in range(n)]
        assert max(vals) - min(vals) >= spread


@SETTINGS
@given(matrices(max_n=4), st.data())
def test_ksum_scalarization_dominance(w, data):
    inst = I(w)
    n = len(w)
    k = data.draw(st.integers(1, n))
    best = brute_force(inst, ksum(k)).best_value
    bounds = []
    for t in sorted(set(w.ravel().tolist())):
        clipped = brute_force(I(np.maximum(w - t, 0))).best_value
        bounds.append(k * t + clipped)
    assert min(bounds) == best
    assert all(b >= best for b in bounds)
    assert solve_k_sum(inst, k)[1] == best


@SETTINGS
@given(matrices(max_n=4), st.data())
def test_apsc_node_bound_is_sound(w, data):
    inst = I(w)
    n = len(w)
    usage = data.draw(st.lists(st.lists(st.integers(0, 3), min_size=n, max_size=n), min_size=n, max_size=n))
    cons = SideConstraintSet.single(usage, data.draw(st.integers(0, 3 * n)))
    perm = data.draw(st.permutations(range(n)))
    depth = data.draw(st.integers(0, n))
    fixed = [(i, perm[i]) for i in range(depth)]
    mask = np.zeros((n, n), dtype=bool)
    for i, j in fixed:
        mask[i, :] = True
        mask[:, j] = True
        mask[i, j] = False
    below = brute_force(inst.with_forbidden(mask), SUM, constraints=cons).best_value
    bound = lap_bound(inst, fixed)
    if below is not None:
        assert bound is not None and bound <= below


@SETTINGS
@given(matrices(max_n=5))
def test_unit_demand_semi_assignment_is_lap(w):
    inst = I(w)
    assert solve_semi_assignment(inst, [1] * len(w)).value == objective_value(inst, solve_hungarian(inst)[0])


@SETTINGS
@given(matrices(max_n=4), st.sampled_from(["sum", "bottleneck", "spread", "mindev", "ksum:1", "ksum:2"]))
def test_oracle_optima_attain_best_value(w, name):
    inst = I(w)
    obj = Objective.parse(name)
    assume(obj.k is None or obj.k <= len(w))
    res = brute_force(inst, obj)
    assert res.best_matchings
    for pairs in res.best_matchings:
        assert objective_value(inst, Matching(pairs), obj) == res.best_value


scenario_args = st.tuples(
    st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 10_000), st.sampled_from(["commit", "reassign"])
)


@SETTINGS
@given(scenario_args)
def test_dynamic_conservation_and_regret(args):
    n, m, horizon, seed, mode = args
    sc = generate_scenario(n, m, horizon, seed=seed, mode=mode)
    best = clairvoyant_optimum(sc)
    for policy in (MyopicPolicy(), GreedyPolicy()):
        traj = run_scenario(sc, policy)
        assert validate_trajectory(sc, traj).passed
        assert traj.total <= best


@SETTINGS
@given(scenario_args, st.integers(1, 3))
def test_renewable_bridge(args, duration):
    n, m, horizon, seed, _ = args
    sc = generate_scenario(n, m, horizon, seed=seed).replace(service_durations=np.full((n, m), duration))
    traj = run_scenario(sc, MyopicPolicy())
    assert validate_trajectory(sc, traj).passed
    assert run_scenario(expand_renewals(sc, traj), MyopicPolicy()).total == traj.total


@SETTINGS
@given(matrices(min_n=2, max_n=5, low=0, high=30), st.sampled_from(["complete", "ring", "line", "er"]), st.integers(0, 99))
def test_cbaa_conflict_free_and_greedy(w, kind, seed):
    inst = I(w, sense="max")
    topo = NetworkTopology.named(kind, len(w), seed=seed)
    res = run_cbaa(inst, topo)
    tasks = [j for _, j in res.matching.pairs]
    assert len(tasks) == len(set(tasks)) and res.conflicts_open == 0
    assert objective_value(inst, res.matching) == objective_value(inst, greedy_sequential(inst))


@SETTINGS
@given(matrices(min_n=2, max_n=4), st.fractions(0, 1, max_denominator=10), st.integers(0, 99))
def test_lossy_logs_are_consistent(w, loss, seed):
    inst = I(w, sense="max")
    out = run_lossy("cbaa", inst, NetworkTopology.ring(len(w), loss=loss, seed=seed), 30)
    assert all(0 <= log.messages_dropped <= log.messages_sent for log in out.logs)
    again = run_lossy("cbaa", inst, NetworkTopology.ring(len(w), loss=loss, seed=seed), 30)
    assert again.as_dict() == out.as_dict()


@SETTINGS
@given(matrices(square=False, low=-50, high=50), st.sampled_from(["min", "max"]))
def test_instance_text_round_trip(w, sense):
    inst = I(w, sense=sense)
    again = io.parse_instance_text(io.emit_instance_text(inst))
    assert again.weights() == inst.weights() and again.sense is inst.sense


@SETTINGS
@given(rational_matrices())
def test_instance_json_round_trip(rows):
    inst = I(rows)
    again = io._instance_from_obj(io.instance_to_obj(inst))
    assert again.weights() == inst.weights()
    assert io.digest(again) == io.digest(inst)


def test_infeasible_side_constraints_agree_with_oracle():
    inst = I([[1, 2], [4, 3]])
    cons = SideConstraintSet.single([[1, 1], [1, 1]], 1)
    assert brute_force(inst, SUM, constraints=cons).best_value is None
    with pytest.raises(InfeasibleError):
        solve_with_side_constraints(inst, cons)
