import dataclasses
import math

import pytest

from uavmrta.mission import (MissionFormatError, Site, UnknownIdError, capability, dump_mission,
                             load_mission, mission_from_dict, mission_to_dict, validate_mission)


def test_replica_is_valid(replica):
    assert validate_mission(replica) == []
    assert len(replica.sites) == 10
    assert len(replica.measurements) == 4
    assert len(replica.robots) == 4
    assert len(replica.tasks) == 15


def test_replica_capability_matrix(replica):
    got = {r.id: set(r.sensors) for r in replica.robots}
    assert got == {1: {1, 3}, 2: {2}, 3: {2, 3}, 4: {1, 4}}


def test_replica_task_distribution(replica):
    counts = {m.id: sum(t.measurement_id == m.id for t in replica.tasks) for m in replica.measurements}
    assert all(c >= 2 for c in counts.values())
    assert all(t.site_id != 1 for t in replica.tasks)
    # every robot can serve at least one task
    for r in replica.robots:
        assert any(t.measurement_id in r.sensors for t in replica.tasks)


def test_removing_r4_leaves_one_uncoverable_violation(replica):
    problems = validate_mission(replica.without_robot(4))
    uncoverable = [p for p in problems if p.startswith("uncoverable task")]
    assert len(uncoverable) == 1
    assert "(a3, m4)" in uncoverable[0]


def test_two_depots_reported_once(replica):
    sites = list(replica.sites)
    sites[1] = dataclasses.replace(sites[1], is_depot=True)
    spec = dataclasses.replace(replica, sites=tuple(sites))
    problems = validate_mission(spec)
    assert [p for p in problems if p.startswith("depot multiplicity")] == [problems[0]]
    assert len([p for p in problems if "depot multiplicity" in p]) == 1


def test_site_on_obstacle(replica):
    grid = replica.grid.with_obstacles([replica.site(5).cell])
    spec = dataclasses.replace(replica, grid=grid)
    assert any(p.startswith("site on obstacle: site 5") for p in validate_mission(spec))


def test_duplicate_task_and_depot_task(replica):
    tasks = replica.tasks + (replica.tasks[0], dataclasses.replace(replica.tasks[0], site_id=1))
    problems = validate_mission(dataclasses.replace(replica, tasks=tasks))
    assert any(p.startswith("duplicate task") for p in problems)
    assert any(p.startswith("task at depot") for p in problems)


def test_validation_is_deterministic_and_pure(replica):
    spec = replica.without_robot(4)
    assert validate_mission(spec) == validate_mission(spec)
    assert mission_to_dict(spec) == mission_to_dict(replica.without_robot(4))


def test_capability_examples(replica):
    assert capability(replica, 1, 3) is True
    assert capability(replica, 2, 1) is False
    with pytest.raises(UnknownIdError):
        capability(replica, 1, 9)
    with pytest.raises(UnknownIdError):
        capability(replica, 9, 1)


def test_round_trip(tmp_path, replica):
    path = tmp_path / "m.json"
    dump_mission(replica, path)
    again = load_mission(path)
    assert again == replica
    assert validate_mission(again) == validate_mission(replica)


def test_missing_budget_is_infinite(replica):
    doc = mission_to_dict(replica)
    for r in doc["robots"]:
        r.pop("budget", None)
    doc["robots"][0]["budget"] = "inf"
    spec = mission_from_dict(doc)
    assert all(math.isinf(r.budget) for r in spec.robots)


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("grid"),
    lambda d: d.__setitem__("version", 99),
    lambda d: d["sites"][0].__setitem__("cell", "nowhere"),
])
def test_malformed_documents(replica, mutate):
    doc = mission_to_dict(replica)
    mutate(doc)
    with pytest.raises(MissionFormatError):
        mission_from_dict(doc)


def test_negative_budget_and_bad_bounds(replica):
    robots = list(replica.robots)
    robots[0] = dataclasses.replace(robots[0], budget=-1.0, max_speed=(0.0, 3.0, 2.0))
    problems = validate_mission(dataclasses.replace(replica, robots=tuple(robots)))
    assert any(p.startswith("robot budget: robot 1") for p in problems)
    assert any(p.startswith("robot kinematic bounds: robot 1") for p in problems)


def test_site_dataclass_is_frozen():
    s = Site(1, (0, 0), True)
    with pytest.raises(dataclasses.FrozenInstanceError):
        s.id = 2
