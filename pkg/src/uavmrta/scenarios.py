"""Shipped replica mission and seeded random instances for testing."""

from __future__ import annotations

import random
from importlib import resources
from pathlib import Path

from .grid import GridMap, dijkstra
from .mission import MINSUM, MeasurementType, MissionSpec, Robot, Site, Task, load_mission


def replica_path() -> Path:
    return Path(str(resources.files("uavmrta") / "data" / "replica_mission.json"))


def load_replica() -> MissionSpec:
    return load_mission(replica_path())


def random_instance(seed: int, max_sites: int = 6, max_tasks: int = 6, max_robots: int = 3,
                    max_grid: int = 8, max_measurements: int = 3, obstacle_density: float = 0.15,
                    objective: str = MINSUM) -> MissionSpec:
    """A small connected unit-cost mission; every task is coverable."""
    rng = random.Random(seed)
    while True:
        nx, ny = rng.randint(3, max_grid), rng.randint(3, max_grid)
        cells = [(x, y) for x in range(nx) for y in range(ny)]
        obstacles = frozenset(c for c in cells if rng.random() < obstacle_density)
        free = [c for c in cells if c not in obstacles]
        n_sites = rng.randint(2, max_sites)
        if len(free) < n_sites:
            continue
        grid = GridMap(nx, ny, 1.0, obstacles)
        site_cells = rng.sample(free, n_sites)
        reach = dijkstra(grid, site_cells[0])
        if all(c in reach for c in site_cells):
            break
    sites = tuple(Site(i + 1, c, i == 0) for i, c in enumerate(site_cells))
    M = rng.randint(1, max_measurements)
    measurements = tuple(MeasurementType(q, f"m{q}") for q in range(1, M + 1))
    R = rng.randint(1, max_robots)
    sensors = [set(q for q in range(1, M + 1) if rng.random() < 0.5) for _ in range(R)]
    for q in range(1, M + 1):
        if not any(q in s for s in sensors):
            sensors[rng.randrange(R)].add(q)
    robots = tuple(Robot(k + 1, frozenset(s)) for k, s in enumerate(sensors))
    pairs = [(i, q) for i in range(2, n_sites + 1) for q in range(1, M + 1)]
    T = rng.randint(1, min(max_tasks, len(pairs)))
    tasks = tuple(Task(i, q) for i, q in sorted(rng.sample(pairs, T)))
    return MissionSpec(grid, sites, measurements, tasks, robots, objective, "EU")
