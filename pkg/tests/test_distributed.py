from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from fleetalloc.distributed import (
    AuctionAgent,
    CBAAAgent,
    NetworkTopology,
    greedy_sequential,
    loss_sweep,
    run_cbaa,
    run_distributed_auction,
    run_lossy,
    sweep_report,
)
from fleetalloc.errors import NonConvergence
from fleetalloc.instance import AssignmentInstance, objective_value
from fleetalloc.lap import solve_auction
from fleetalloc.oracle import brute_force

I = AssignmentInstance.from_matrix


def test_topology_basics():
    assert NetworkTopology.complete(3).diameter == 1
    assert NetworkTopology.line(5).diameter == 4
    assert NetworkTopology.ring(6).diameter == 3
    assert NetworkTopology.complete(1).diameter == 0
    disconnected = NetworkTopology.from_edges(4, [(0, 1), (2, 3)])
    assert not disconnected.is_connected and disconnected.diameter is None
    for seed in range(20):
        topo = NetworkTopology.erdos_renyi(7, 0.1, seed=seed)
        assert topo.is_connected and topo.diameter <= 6


def test_topology_validation():
    with pytest.raises(ValueError):
        NetworkTopology(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        NetworkTopology.complete(2, loss=Fraction(3, 2))
    with pytest.raises(ValueError):
        NetworkTopology.from_edges(2, [(0, 2)])


def test_single_agent_auction():
    res = run_distributed_auction(I([[5]]), NetworkTopology.complete(1), Fraction(1, 2))
    assert res.matching.pairs == ((0, 0),)
    assert res.rounds <= 2


def test_complete_topology_matches_centralized_auction():
    rng = np.random.default_rng(21)
    for _ in range(30):
        n = int(rng.integers(2, 6))
        inst = I(rng.integers(0, 15, (n, n)))
        eps = Fraction(1, n + 1)
        res = run_distributed_auction(inst, NetworkTopology.complete(n), eps)
        central, _, _ = solve_auction(inst, eps)
        assert objective_value(inst, res.matching) == objective_value(inst, central)


def test_line_of_four_is_optimal():
    rng = np.random.default_rng(22)
    for _ in range(30):
        inst = I(rng.integers(0, 10, (4, 4)))
        res = run_distributed_auction(inst, NetworkTopology.line(4), Fraction(1, 5))
        assert objective_value(inst, res.matching) == brute_force(inst).best_value


def test_auction_rejects_bad_networks():
    inst = I([[1, 2], [3, 4]])
    with pytest.raises(ValueError, match="disconnected"):
        run_distributed_auction(inst, NetworkTopology.from_edges(2, []), Fraction(1, 3))
    with pytest.raises(ValueError):
        run_distributed_auction(inst, NetworkTopology.complete(2, loss="1/2"), Fraction(1, 3))


def test_auction_round_guard_raises():
    inst = I([[0, 0, 0], [0, 0, 0], [0, 0, 0]])
    with pytest.raises(NonConvergence) as err:
        run_distributed_auction(inst, NetworkTopology.line(3), Fraction(1, 4), max_rounds=1)
    assert err.value.diagnostics["rounds"] == 1


def test_greedy_examples():
    inst = I([[10, 1], [1, 9]], sense="max")
    m = greedy_sequential(inst)
    assert m.pairs == ((0, 0), (1, 1))
    assert objective_value(inst, m) == 19
    flat = greedy_sequential(I(np.full((3, 3), 4), sense="max"))
    assert flat.pairs == ((0, 0), (1, 1), (2, 2))


def test_greedy_half_bound_anti_diagonal():
    rng = np.random.default_rng(23)
    for _ in range(200):
        w = rng.integers(0, 10, (6, 6)) + 30 * np.fliplr(np.eye(6, dtype=int))
        inst = I(w, sense="max")
        assert 2 * objective_value(inst, greedy_sequential(inst)) >= brute_force(inst).best_value


def test_cbaa_two_by_two():
    inst = I([[10, 1], [1, 9]], sense="max")
    res = run_cbaa(inst, NetworkTopology.complete(2))
    assert res.matching.pairs == ((0, 0), (1, 1))
    assert objective_value(inst, res.matching) == 19


def test_cbaa_single_agent_many_tasks():
    res = run_cbaa(I([[3, 8, 5, 8]], sense="max"), NetworkTopology.complete(1))
    assert res.matching.pairs == ((0, 1),)
    assert res.logs[0].digests and res.converged


def test_cbaa_ring_six_by_six():
    rng = np.random.default_rng(24)
    for _ in range(200):
        inst = I(rng.integers(0, 50, (6, 6)), sense="max")
        res = run_cbaa(inst, NetworkTopology.ring(6))
        assert res.conflicts_open == 0
        tasks = [j for _, j in res.matching.pairs]
        assert len(tasks) == len(set(tasks))
        assert 2 * objective_value(inst, res.matching) >= brute_force(inst).best_value


def test_cbaa_rectangular_and_async():
    rng = np.random.default_rng(25)
    for seed in range(20):
        inst = I(rng.integers(0, 20, (4, 6)), sense="max")
        topo = NetworkTopology.line(4, seed=seed)
        res = run_cbaa(inst, topo)
        assert objective_value(inst, res.matching) == objective_value(inst, greedy_sequential(inst))
        slow = run_cbaa(inst, topo, sync=False)
        assert slow.converged and slow.conflicts_open == 0


def test_cbaa_needs_profit_instance():
    with pytest.raises(ValueError):
        run_cbaa(I([[1, 2], [3, 4]]), NetworkTopology.complete(2))


def _replay(agent, inbox, digests):
    """Rebuild one agent from its own inputs and the recorded deliveries."""
    states = []
    for r, delivered in enumerate(inbox):
        agent.bid()
        agent.receive([m for _, m in delivered[agent.ident]])
        assert agent.digest() == digests[r][agent.ident]
        states.append(agent.message()[0])
    return states


def test_cbaa_locality_and_bid_monotonicity():
    rng = np.random.default_rng(26)
    for _ in range(20):
        w = rng.integers(0, 30, (5, 5))
        inst = I(w, sense="max")
        topo = NetworkTopology.line(5)
        res = run_cbaa(inst, topo, record_messages=True)
        digests = [log.digests for log in res.logs]
        for i in range(5):
            for r, delivered in enumerate(res.inbox):
                assert {s for s, _ in delivered[i]} <= set(topo.neighbors(i))
            bids = _replay(CBAAAgent(i, w[i].tolist()), res.inbox, digests)
            assert all(min(b) >= 0 for b in bids)
            assert np.all(np.diff(np.array(bids), axis=0) >= 0)


def test_auction_locality_and_price_monotonicity():
    rng = np.random.default_rng(27)
    for _ in range(20):
        n = 4
        c = rng.integers(0, 12, (n, n))
        res = run_distributed_auction(I(c), NetworkTopology.ring(n), Fraction(1, n + 1), record_messages=True)
        digests = [log.digests for log in res.logs]
        for i in range(n):
            agent = AuctionAgent(i, [(n + 1) * int(x) for x in c[i]], 1)
            prices = _replay(agent, res.inbox, digests)
            assert np.all(np.diff(np.array(prices), axis=0) >= 0)


def test_lossless_lossy_run_is_identical():
    rng = np.random.default_rng(28)
    inst = I(rng.integers(0, 20, (5, 5)), sense="max")
    topo = NetworkTopology.ring(5)
    out = run_lossy("cbaa", inst, topo, 100)
    ref = run_cbaa(inst, topo)
    assert out.converged and out.rounds == ref.rounds
    assert out.value == objective_value(inst, ref.matching)
    assert out.reference == brute_force(inst).best_value


def test_total_loss_leaves_first_choices_contested():
    rng = np.random.default_rng(29)
    for seed in range(10):
        w = rng.integers(1, 20, (5, 5))
        out = run_lossy("cbaa", I(w, sense="max"), NetworkTopology.complete(5, loss=1, seed=seed), 30)
        first = Counter(int(np.argmax(row)) for row in w)
        assert not out.converged
        assert out.conflicts_open == sum(1 for c in first.values() if c > 1)
        assert all(log.messages_dropped == log.messages_sent for log in out.logs)


def test_lossy_auction_reports_instead_of_raising():
    inst = I(np.random.default_rng(30).integers(0, 20, (5, 5)))
    out = run_lossy("dauction", inst, NetworkTopology.line(5, loss=1), 20)
    assert not out.converged
    assert out.as_dict()["protocol"] == "dauction"


def test_loss_sweep_rows():
    rng = np.random.default_rng(31)
    instances = [I(rng.integers(0, 20, (4, 4)), sense="max") for _ in range(3)]
    levels = [Fraction(k, 10) for k in range(10)]
    rows = loss_sweep("cbaa", instances, "complete", levels, seed=1, max_rounds=40)
    assert len(rows) == 10
    assert all(r["mean_value_ratio"] is not None for r in rows)
    text = sweep_report(rows)
    assert text == sweep_report(loss_sweep("cbaa", instances, "complete", levels, seed=1, max_rounds=40))
