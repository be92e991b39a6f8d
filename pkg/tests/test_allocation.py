import dataclasses
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from uavmrta.allocation import (AllocationSolution, DisconnectedRouteError, FastEvaluator, Gene, TaskIndex,
                                evaluate, load_solution, dump_solution, route_nodes, route_of,
                                solution_from_dict, solution_to_dict)
from uavmrta.grid import CostTensor, GridMap, build_cost_tensor
from uavmrta.mission import MINMAX, MINSUM, Robot, Site
from uavmrta.scenarios import random_instance
from uavmrta.grid import mission_cost_tensor

from oracles import bfs_distances


def _matrix7():
    m = [[0.0 if i == j else 10.0 for j in range(7)] for i in range(7)]
    m[0][3] = m[3][0] = 3.0
    m[3][6] = m[6][3] = 2.0
    m[6][0] = m[0][6] = 4.0
    return CostTensor.from_matrix(m, n_robots=4)


def test_route_of_hand_summed():
    sol = AllocationSolution((Gene(4, 2, 3), Gene(7, 3, 3)))
    assert route_of(sol, 3, _matrix7()) == ([1, 4, 7, 1], 9.0)


def test_route_of_on_bfs_tensor():
    obstacles = frozenset({(1, 0), (1, 1), (1, 2)})
    cells = [(0, 0), (3, 0), (2, 3)]
    sites = [Site(i + 1, c, i == 0) for i, c in enumerate(cells)]
    t = build_cost_tensor(GridMap(4, 4, obstacles=obstacles), sites, [Robot(1, frozenset({1}))])
    legs = [bfs_distances(4, 4, obstacles, a)[b] for a, b in ((cells[0], cells[1]), (cells[1], cells[2]), (cells[2], cells[0]))]
    sol = AllocationSolution((Gene(2, 1, 1), Gene(3, 1, 1)))
    assert route_of(sol, 1, t) == ([1, 2, 3, 1], float(sum(legs)))


def test_empty_robot_route():
    assert route_of(AllocationSolution(()), 2, _matrix7()) == ([1], 0.0)


def test_consecutive_same_site_collapses():
    sol = AllocationSolution((Gene(4, 2, 3), Gene(4, 3, 3)))
    seq, cost = route_of(sol, 3, _matrix7())
    assert seq == [1, 4, 1] and cost == 6.0
    assert [s for s, _ in route_nodes(sol, 3)] == [4]


def test_split_site_is_revisited():
    sol = AllocationSolution((Gene(4, 2, 3), Gene(7, 3, 3), Gene(4, 3, 3)))
    seq, cost = route_of(sol, 3, _matrix7())
    assert seq == [1, 4, 7, 4, 1] and cost == 3 + 2 + 2 + 3


def test_disconnected_leg_carries_leg():
    m = [[0, 1, math.inf], [1, 0, 1], [math.inf, 1, 0]]
    t = CostTensor.from_matrix(m)
    with pytest.raises(DisconnectedRouteError) as err:
        route_of(AllocationSolution((Gene(3, 1, 1),)), 1, t)
    assert err.value.leg == (1, 3)


def test_sum_and_max(replica, replica_tensor):
    # robot 3: a1 -> a2 -> a1, robot 4: a1 -> a9 -> a1
    c2 = replica_tensor.cost(1, 2, 3) * 2
    c9 = replica_tensor.cost(1, 9, 4) * 2
    sol = AllocationSolution((Gene(2, 3, 3), Gene(9, 1, 4)))
    rep = evaluate(sol, replica, replica_tensor)
    assert rep.c1 == c2 + c9 and rep.c2 == max(c2, c9)


def test_capability_violation_for_r2(replica, replica_tensor):
    genes = [Gene(t.site_id, t.measurement_id, 2 if (t.site_id, t.measurement_id) == (3, 1) else
                  replica.capable_robots(t.measurement_id)[0]) for t in replica.tasks]
    rep = evaluate(AllocationSolution(tuple(genes)), replica, replica_tensor)
    kinds = [v.kind for v in rep.violations]
    assert kinds == ["capability"]
    assert "r2" in rep.violations[0].detail and "m1" in rep.violations[0].detail


def test_budget_violation_excess(replica, replica_tensor):
    sol = AllocationSolution((Gene(2, 3, 3), Gene(2, 1, 4)))
    cost = replica_tensor.cost(1, 2, 3) * 2
    robots = tuple(dataclasses.replace(r, budget=cost - 1) if r.id == 3 else r for r in replica.robots)
    spec = dataclasses.replace(replica, robots=robots)
    rep = evaluate(sol, spec, replica_tensor)
    budget = [v for v in rep.violations if v.kind == "budget"]
    assert len(budget) == 1 and budget[0].excess == 1.0
    assert rep.budget_excess() == 1.0


def test_coverage_missing_and_duplicate(replica, replica_tensor):
    genes = [Gene(t.site_id, t.measurement_id, replica.capable_robots(t.measurement_id)[0]) for t in replica.tasks]
    genes = genes[1:] + [genes[2]]
    rep = evaluate(AllocationSolution(tuple(genes)), replica, replica_tensor)
    details = [v.detail for v in rep.violations if v.kind == "coverage"]
    assert any(d.startswith("missing") for d in details)
    assert any(d.startswith("duplicate") for d in details)


def _random_solution(spec, rng):
    tasks = list(spec.tasks)
    rng.shuffle(tasks)
    return AllocationSolution(tuple(Gene(t.site_id, t.measurement_id, rng.choice(spec.capable_robots(t.measurement_id)))
                                    for t in tasks))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_c2_le_c1_and_fast_evaluator_agrees(seed):
    spec = random_instance(seed)
    tensor = mission_cost_tensor(spec)
    sol = _random_solution(spec, random.Random(seed))
    rep = evaluate(sol, spec, tensor)
    assert rep.c2 <= rep.c1
    assert rep.c1 == sum(rep.per_robot_cost)
    if sum(c > 0 for c in rep.per_robot_cost) == 1:
        assert rep.c1 == rep.c2
    ev = FastEvaluator(spec, tensor)
    assert ev.route_costs(*ev.from_solution(sol)) == rep.per_robot_cost
    assert ev.to_solution(*ev.from_solution(sol)) == sol


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_identical_robot_relabelling_keeps_objectives(seed):
    spec = random_instance(seed, max_robots=3)
    if len(spec.robots) < 2:
        return
    # make robots 1 and 2 identical, then swap their labels in the solution
    robots = list(spec.robots)
    both = robots[0].sensors | robots[1].sensors
    robots[0] = dataclasses.replace(robots[0], sensors=both)
    robots[1] = dataclasses.replace(robots[1], sensors=both)
    spec = dataclasses.replace(spec, robots=tuple(robots))
    tensor = mission_cost_tensor(spec)
    sol = _random_solution(spec, random.Random(seed))
    swap = {1: 2, 2: 1}
    other = AllocationSolution(tuple(dataclasses.replace(g, robot=swap.get(g.robot, g.robot)) for g in sol.genes))
    a, b = evaluate(sol, spec, tensor), evaluate(other, spec, tensor)
    assert (a.c1, a.c2) == (b.c1, b.c2)


def test_solution_file_round_trip(tmp_path, replica, replica_tensor):
    sol = _random_solution(replica, random.Random(1))
    path = tmp_path / "s.json"
    dump_solution(sol, replica, replica_tensor, path)
    assert load_solution(path) == sol
    doc = solution_to_dict(sol, replica, replica_tensor, MINMAX)
    assert doc["objective"] == MINMAX
    assert set(doc) >= {"genes", "c1", "c2", "per_robot"}
    assert solution_from_dict(doc) == sol
    assert evaluate(sol, replica, replica_tensor).objective(MINSUM) == doc["c1"]


def test_task_index_is_sorted(replica):
    idx = TaskIndex(replica)
    assert idx.tasks == sorted(replica.tasks)
    assert idx.depot == 0
