"""Occupancy grid, elementary move costs and site-to-site Dijkstra costs."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

Cell = tuple[int, int]

FOUR = "four"
EIGHT = "eight"

_STEPS_4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
_STEPS_8 = _STEPS_4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))

# (cell_from, cell_to, robot_id) -> positive cost; only called for adjacent cells
ElementaryCostFn = Callable[[Cell, Cell, int], float]


def unit_cost(a: Cell, b: Cell, k: int) -> float:
    return 1.0


@dataclass(frozen=True)
class GridMap:
    nx: int
    ny: int
    cell_size_m: float = 1.0
    obstacles: frozenset[Cell] = field(default_factory=frozenset)
    connectivity: str = FOUR

    def __post_init__(self):
        if self.connectivity not in (FOUR, EIGHT):
            raise ValueError(f"connectivity must be {FOUR!r} or {EIGHT!r}")

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.nx and 0 <= y < self.ny

    def traversable(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.obstacles

    def with_obstacles(self, extra: Iterable[Cell]) -> GridMap:
        return GridMap(self.nx, self.ny, self.cell_size_m,
                       self.obstacles | frozenset(extra), self.connectivity)

    def cell_centre_m(self, cell: Cell) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.cell_size_m, (cell[1] + 0.5) * self.cell_size_m)


def neighbors(grid: GridMap, cell: Cell, robot_id: int = 1,
              cost_fn: ElementaryCostFn = unit_cost) -> list[tuple[Cell, float]]:
    if not grid.in_bounds(cell):
        raise ValueError(f"cell {cell} is out of bounds")
    if cell in grid.obstacles:
        raise ValueError(f"cell {cell} is an obstacle")
    steps = _STEPS_4 if grid.connectivity == FOUR else _STEPS_8
    out = []
    for dx, dy in steps:
        nb = (cell[0] + dx, cell[1] + dy)
        if grid.traversable(nb):
            c = cost_fn(cell, nb, robot_id)
            if not c > 0:
                raise ValueError(f"elementary cost {cell}->{nb} must be > 0, got {c}")
            out.append((nb, c))
    return out


def dijkstra(grid: GridMap, source: Cell, robot_id: int = 1,
             cost_fn: ElementaryCostFn = unit_cost) -> dict[Cell, float]:
    """Minimal cost from ``source`` to every reachable cell."""
    dist = {source: 0.0}
    heap = [(0.0, source)]
    while heap:
        d, cell = heapq.heappop(heap)
        if d > dist[cell]:
            continue
        for nb, c in neighbors(grid, cell, robot_id, cost_fn):
            nd = d + c
            if nd < dist.get(nb, math.inf):
                dist[nb] = nd
                heapq.heappush(heap, (nd, nb))
    return dist


class CostTensor:
    """c(i, i', k): minimal travel cost between sites per robot.

    Ids are 1-based as in the mission.  Unreachable pairs hold ``math.inf``
    so that any route using them costs ``inf`` rather than a finite number.
    """

    def __init__(self, values: np.ndarray):
        values = np.array(values, dtype=float)
        if values.ndim != 3 or values.shape[0] != values.shape[1]:
            raise ValueError("cost tensor must have shape (A, A, R)")
        self.values = values
        self.values.setflags(write=False)
        # per-robot nested lists, [k][i][j] 0-based, for tight loops
        self.rows = [values[:, :, k].tolist() for k in range(values.shape[2])]

    @property
    def n_sites(self) -> int:
        return self.values.shape[0]

    @property
    def n_robots(self) -> int:
        return self.values.shape[2]

    def cost(self, i: int, j: int, k: int) -> float:
        return self.rows[k - 1][i - 1][j - 1]

    def reachable(self, i: int, j: int, k: int) -> bool:
        return not math.isinf(self.cost(i, j, k))

    @classmethod
    def from_matrix(cls, matrix: Sequence[Sequence[float]], n_robots: int = 1) -> CostTensor:
        """Same site-to-site matrix for every robot (handy for fixtures)."""
        m = np.asarray(matrix, dtype=float)
        return cls(np.repeat(m[:, :, None], n_robots, axis=2))


def build_cost_tensor(grid: GridMap, sites, robots,
                      cost_fn: ElementaryCostFn = unit_cost,
                      robot_independent: bool = True) -> CostTensor:
    """Run Dijkstra from every site cell, once per robot (or once if costs are shared)."""
    A, R = len(sites), len(robots)
    out = np.full((A, A, R), math.inf)
    cells = [s.cell for s in sites]
    for s in sites:
        if not grid.traversable(s.cell):
            raise ValueError(f"site {s.id} cell {s.cell} is not traversable")
    shared = None
    for kk, robot in enumerate(robots):
        if robot_independent and shared is not None:
            out[:, :, kk] = shared
            continue
        block = np.full((A, A), math.inf)
        for i, src in enumerate(cells):
            dist = dijkstra(grid, src, robot.id, cost_fn)
            for j, dst in enumerate(cells):
                block[i, j] = dist.get(dst, math.inf)
            block[i, i] = 0.0
        out[:, :, kk] = block
        shared = block
    return CostTensor(out)


def mission_cost_tensor(spec, cost_fn: ElementaryCostFn = unit_cost) -> CostTensor:
    sites = sorted(spec.sites, key=lambda s: s.id)
    robots = sorted(spec.robots, key=lambda r: r.id)
    return build_cost_tensor(spec.grid, sites, robots, cost_fn,
                             robot_independent=cost_fn is unit_cost)
