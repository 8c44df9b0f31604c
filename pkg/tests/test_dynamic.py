import dataclasses
from fractions import Fraction

import numpy as np
import pytest

from fleetalloc.dynamic import (
    GreedyPolicy,
    MyopicPolicy,
    NullPolicy,
    Scenario,
    clairvoyant_optimum,
    expand_renewals,
    generate_scenario,
    initial_state,
    make_policy,
    per_period_variant_policy,
    run_scenario,
    step,
    summary,
    validate_trajectory,
)
from fleetalloc.errors import ConstraintViolation, GuardExceeded
from fleetalloc.instance import AssignmentInstance, SideConstraintSet, objective_value
from fleetalloc.lap import solve_hungarian
from fleetalloc.oracle import brute_force
from fleetalloc.variants import solve_bottleneck


def two_period():
    return Scenario.build(2, [1], [1, 2], [[[3, 10]], [[3, 10]]])


def test_no_arrivals_advances_one_period():
    sc = Scenario.build(3, [None], [None], np.zeros((3, 1, 1), int).tolist())
    decision, nxt = step(initial_state(sc), sc, MyopicPolicy())
    assert decision.pairs == ()
    assert nxt.period == 2


def test_single_period_myopic_is_static_optimum():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = rng.integers(1, 20, (3, 3))
        sc = Scenario.build(1, [1, 1, 1], [1, 1, 1], [p.tolist()])
        traj = run_scenario(sc, MyopicPolicy())
        inst = AssignmentInstance.from_matrix(p, sense="max")
        assert traj.total == objective_value(inst, solve_hungarian(inst)[0])
        assert traj.total == clairvoyant_optimum(sc)


def test_two_period_myopic_versus_clairvoyant():
    sc = two_period()
    traj = run_scenario(sc, MyopicPolicy())
    assert traj.decisions == (((0, 0),), ())
    assert traj.total == 3
    assert clairvoyant_optimum(sc) == 10


def test_null_policy_strands_everything():
    sc = generate_scenario(3, 4, 3, seed=1)
    traj = run_scenario(sc, NullPolicy())
    assert traj.total == 0
    assert len(traj.unserved_tasks(sc)) == sum(a is not None for a in sc.task_arrivals)


def test_single_period_random_matches_oracle():
    for seed in range(30):
        sc = generate_scenario(3, 4, 1, seed=seed)
        traj = run_scenario(sc, MyopicPolicy())
        inst = AssignmentInstance.from_matrix(sc.numer[0], sense="max")
        assert traj.total == brute_force(inst).best_value


def test_two_period_three_by_three_clairvoyant_dominates():
    for seed in range(40):
        sc = generate_scenario(3, 3, 2, seed=seed)
        best = clairvoyant_optimum(sc)
        for policy in (MyopicPolicy(), GreedyPolicy(), make_policy("bottleneck")):
            assert run_scenario(sc, policy).total <= best


def test_disjoint_pairs_clairvoyant_is_sum_of_pair_maxima():
    util = [[[4, 0], [0, 0]], [[6, 0], [0, 2]], [[1, 0], [0, 5]]]
    sc = Scenario.build(3, [1, 2], [1, 2], util)
    assert clairvoyant_optimum(sc) == 6 + 5


def test_clairvoyant_guard():
    sc = generate_scenario(6, 5, 2, seed=0)
    with pytest.raises(GuardExceeded):
        clairvoyant_optimum(sc)


def test_conflicting_policy_rejected():
    sc = Scenario.build(1, [1, 1], [1], [[[1], [2]]])

    def both(view):
        return [(0, 0), (1, 0)]

    state = initial_state(sc)
    with pytest.raises(ConstraintViolation, match="constraint violation"):
        step(state, sc, both)
    assert state.period == 1 and state.alpha == (1, 1)


def test_unavailable_agent_rejected_by_step():
    sc = Scenario.build(2, [1, 2], [1], np.ones((2, 2, 1), int).tolist())
    with pytest.raises(ConstraintViolation):
        step(initial_state(sc), sc, lambda view: [(1, 0)])


def test_validation_passes_on_run_output():
    for seed in range(20):
        sc = generate_scenario(4, 3, 4, seed=seed, mode="reassign" if seed % 2 else "commit")
        rep = validate_trajectory(sc, run_scenario(sc, MyopicPolicy()))
        assert rep.passed, rep.failed()


def test_corrupted_unavailable_agent_flags_availability():
    sc = Scenario.build(2, [1, 2], [1, 1], np.ones((2, 2, 2), int).tolist())
    traj = run_scenario(sc, NullPolicy())
    bad = dataclasses.replace(
        traj,
        decisions=(((1, 0),), ()),
        per_period_values=(Fraction(1), Fraction(0)),
        total=Fraction(1),
    )
    rep = validate_trajectory(sc, bad)
    assert not rep.families["availability"].passed
    assert rep.families["availability"].first_violation == ("agent", 1, 1)


def test_mismatched_alpha_flags_conservation():
    sc = two_period()
    traj = run_scenario(sc, MyopicPolicy())
    assert traj.alpha == ((1, 0),)
    bad = dataclasses.replace(traj, alpha=((1, 1),))
    rep = validate_trajectory(sc, bad)
    assert not rep.families["conservation"].passed
    assert rep.families["conservation"].first_violation == ("alpha", 0, 2)


def test_initial_condition_checked():
    sc = two_period()
    traj = run_scenario(sc, MyopicPolicy())
    bad = dataclasses.replace(traj, beta=((0, 0), (0, 0)))
    assert not validate_trajectory(sc, bad).families["initial"].passed


def test_future_arrivals_do_not_change_past_decisions():
    rng = np.random.default_rng(3)
    for seed in range(30):
        sc = generate_scenario(4, 4, 4, seed=seed)
        cut = int(rng.integers(1, 4))

        def shuffle(arr):
            return tuple(a if a is None or a <= cut else int(rng.integers(cut + 1, 5)) for a in arr)

        numer = sc.numer.copy()
        numer[cut:] = rng.integers(0, 9, numer[cut:].shape)
        alt = sc.replace(agent_arrivals=shuffle(sc.agent_arrivals), task_arrivals=shuffle(sc.task_arrivals), numer=numer)
        for policy in (MyopicPolicy(), GreedyPolicy()):
            a = run_scenario(sc, policy).decisions[:cut]
            b = run_scenario(alt, policy).decisions[:cut]
            assert a == b


def test_reassign_mode_finalizes_after_eta():
    sc = Scenario.build(3, [1], [1, 2], [[[5, 0]], [[5, 9]], [[5, 9]]], mode="reassign", eta=[[3, 1]])
    traj = run_scenario(sc, MyopicPolicy())
    assert traj.pending[0] == ((0, 0),)
    assert traj.decisions[1] == ((0, 1),)
    assert traj.total == 9
    commit = run_scenario(sc.replace(mode="commit"), MyopicPolicy())
    assert commit.total == 5
    assert validate_trajectory(sc, traj).passed


def test_renewable_bridge_equal_totals():
    for seed in range(20):
        sc = generate_scenario(3, 5, 4, seed=seed).replace(service_durations=np.full((3, 5), 1 + seed % 2))
        traj = run_scenario(sc, MyopicPolicy())
        assert validate_trajectory(sc, traj).passed
        bridged = run_scenario(expand_renewals(sc, traj), MyopicPolicy())
        assert bridged.total == traj.total


def test_renewable_agent_reenters():
    sc = Scenario.build(3, [1], [1, 2], [[[4, 0]], [[0, 0]], [[0, 6]]], service_durations=[[1, 1]])
    traj = run_scenario(sc, MyopicPolicy())
    assert traj.total == 10
    assert traj.agent_origin[1] == 0 and traj.agent_arrivals[1] == 2


def test_bottleneck_policy_single_period():
    rng = np.random.default_rng(8)
    for _ in range(10):
        c = rng.integers(0, 20, (3, 3))
        sc = Scenario.build(1, [1, 1, 1], [1, 1, 1], [c.tolist()], sense="min")
        traj = run_scenario(sc, per_period_variant_policy("bottleneck"))
        assert traj.per_period_objective[0] == solve_bottleneck(AssignmentInstance.from_matrix(c)).threshold


def test_fair_policy_all_equal_spread_zero():
    sc = Scenario.build(1, [1, 1], [1, 1], [[[4, 4], [4, 4]]], sense="min")
    traj = run_scenario(sc, per_period_variant_policy("fair"))
    assert traj.per_period_objective == (0,)


def test_slack_side_constraints_match_myopic():
    for seed in range(20):
        sc = generate_scenario(3, 3, 3, seed=seed)
        cons = SideConstraintSet.single(np.ones((3, 3), int), 1000)
        a = run_scenario(sc, MyopicPolicy())
        b = run_scenario(sc, per_period_variant_policy(cons))
        assert a.decisions == b.decisions


def test_semi_assignment_policy():
    sc = Scenario.build(1, [1, 1, 1], [1, 1], [[[1, 9], [1, 9], [9, 1]]], sense="min", demand=(2, 1))
    traj = run_scenario(sc, per_period_variant_policy([2, 1]))
    assert traj.total == 3
    assert validate_trajectory(sc, traj).passed


def test_unsupported_variant_rejected():
    with pytest.raises((TypeError, ValueError)):
        per_period_variant_policy(object())


def test_cost_mode_reports_coverage():
    sc = Scenario.build(1, [1], [1, 1], [[[2, 3]]], sense="min")
    traj = run_scenario(sc, MyopicPolicy())
    out = summary(sc, traj, clairvoyant_optimum(sc))
    assert out["coverage_satisfied"] is False
    assert out["unserved_tasks"] == 1


def test_scenario_invariants():
    with pytest.raises(ValueError):
        Scenario.build(0, [], [], [])
    with pytest.raises(ValueError):
        Scenario.build(2, [3], [1], np.zeros((2, 1, 1), int).tolist())


def test_generation_is_seeded():
    assert generate_scenario(3, 3, 4, seed=7) == generate_scenario(3, 3, 4, seed=7)
    assert generate_scenario(3, 3, 4, seed=7) != generate_scenario(3, 3, 4, seed=8)
