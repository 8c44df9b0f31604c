import numpy as np
import pytest

from fleetalloc.errors import GuardExceeded
from fleetalloc.instance import (
    BOTTLENECK,
    SUM,
    AssignmentInstance,
    Matching,
    objective_value,
)
from fleetalloc.oracle import brute_force

I = AssignmentInstance.from_matrix


def test_two_by_two_sum():
    res = brute_force(I([[1, 2], [4, 3]]))
    assert res.best_value == 4
    assert res.enumerated == 2
    assert res.best_matchings == (((0, 0), (1, 1)),)


@pytest.mark.parametrize("objective", [SUM, BOTTLENECK])
def test_single_pair(objective):
    assert brute_force(I([[7]]), objective).best_value == 7


def test_bottleneck_unique_optimum():
    res = brute_force(I([[1, 5], [5, 1]]), BOTTLENECK)
    assert res.best_value == 1
    assert res.best_matchings == (((0, 0), (1, 1)),)


def test_all_optima_attain_value():
    inst = I(np.full((3, 3), 2))
    res = brute_force(inst)
    assert len(res.best_matchings) == 6
    for pairs in res.best_matchings:
        assert objective_value(inst, Matching(pairs)) == res.best_value


def test_forbidden_pairs_are_skipped():
    inst = I([[1, 2], [3, 4]], forbidden=[[True, False], [False, False]])
    res = brute_force(inst)
    assert res.enumerated == 1
    assert res.best_value == 5


def test_rectangular_counts_injective_maps():
    res = brute_force(I([[1, 2, 3], [4, 5, 6]]))
    assert res.enumerated == 6
    assert brute_force(I([[1], [5], [3]])).best_value == 1


def test_guard():
    with pytest.raises(GuardExceeded, match="oracle limit"):
        brute_force(I(np.zeros((10, 10), int)))


def test_infeasible_returns_none():
    inst = I([[1, 2], [3, 4]], forbidden=[[True, True], [False, False]])
    res = brute_force(inst)
    assert res.best_value is None and res.best_matchings == ()


def test_apraq_partial_matchings_count():
    inst = I([[1, 1], [1, 1]], sense="max", qualification=np.ones((2, 2), bool))
    # empty, four singletons, two perfect matchings
    assert brute_force(inst, qualification=True).enumerated == 7
