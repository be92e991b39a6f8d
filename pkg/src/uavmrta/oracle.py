"""Exhaustive branch-and-bound solver used as ground truth on small instances."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .allocation import AllocationSolution, Gene
from .grid import CostTensor
from .mission import MINSUM, MissionSpec, Task

_EPS = 1e-9


class InstanceTooLargeError(RuntimeError):
    def __init__(self, estimate: int, cap: int):
        super().__init__(f"instance too large: estimated {estimate} states > cap {cap}")
        self.estimate = estimate


class InfeasibleError(RuntimeError):
    pass


class OracleTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleBounds:
    max_states: int = 10**7
    time_limit_s: float = 300.0

    def __post_init__(self):
        if self.max_states <= 0 or self.time_limit_s <= 0:
            raise ValueError("oracle caps must be > 0")


def is_metric(tensor: CostTensor, tol: float = 1e-9) -> bool:
    v = tensor.values
    A = v.shape[0]
    with np.errstate(invalid="ignore"):
        for k in range(v.shape[2]):
            m = v[:, :, k]
            for j in range(A):
                # m[i, l] <= m[i, j] + m[j, l]; inf - inf gives nan, which compares False
                if ((m - (m[:, j:j + 1] + m[j:j + 1, :])) > tol).any():
                    return False
    return True


def search_space_estimate(spec: MissionSpec) -> int:
    assignments = 1
    for t in spec.tasks:
        assignments *= len(spec.capable_robots(t.measurement_id))
    n_sites = len({t.site_id for t in spec.tasks})
    return assignments * math.factorial(n_sites)


def solve_exact(spec: MissionSpec, tensor: CostTensor, objective: str | None = None,
                bounds: OracleBounds = OracleBounds()) -> tuple[AllocationSolution, float]:
    """Global optimum of MinSum or MinMax over all feasible allocations.

    Ties are broken towards the lexicographically smallest canonical gene
    list (robots in id order, each robot's sites in visiting order,
    measurements ascending within a site).
    """
    objective = objective or spec.objective
    tasks: list[Task] = sorted(spec.tasks)
    if not tasks:
        return AllocationSolution(()), 0.0
    capable = [spec.capable_robots(t.measurement_id) for t in tasks]
    for t, c in zip(tasks, capable):
        if not c:
            raise InfeasibleError(f"infeasible: no robot holds m{t.measurement_id} for task at a{t.site_id}")
    estimate = search_space_estimate(spec)
    if estimate > bounds.max_states:
        raise InstanceTooLargeError(estimate, bounds.max_states)

    depot = spec.depot.id
    robot_ids = sorted(r.id for r in spec.robots)
    budgets = {k: spec.robot(k).budget for k in robot_ids}
    prune = is_metric(tensor)
    minsum = objective == MINSUM
    deadline = time.monotonic() + bounds.time_limit_s

    tour_memo: dict[tuple[int, frozenset], tuple[float, tuple[int, ...]]] = {}

    def tour(k: int, sites: frozenset) -> tuple[float, tuple[int, ...]]:
        key = (k, sites)
        hit = tour_memo.get(key)
        if hit is not None:
            return hit
        row = tensor.rows[k - 1]
        best = (math.inf, tuple(sorted(sites)))
        if sites:
            for perm in itertools.permutations(sorted(sites)):
                c = row[depot - 1][perm[0] - 1]
                for a, b in zip(perm, perm[1:]):
                    c += row[a - 1][b - 1]
                c += row[perm[-1] - 1][depot - 1]
                if c < best[0] - _EPS:
                    best = (c, perm)
        else:
            best = (0.0, ())
        tour_memo[key] = best
        return best

    # most constrained tasks first shrinks the tree early
    order = sorted(range(len(tasks)), key=lambda i: (len(capable[i]), i))
    assigned: dict[int, list[Task]] = {k: [] for k in robot_ids}
    site_sets: dict[int, frozenset] = {k: frozenset() for k in robot_ids}
    incumbent: list = [math.inf, None]
    counter = [0]

    def combine(costs):
        return sum(costs) if minsum else max(costs)

    def canonical() -> tuple[Gene, ...]:
        genes = []
        for k in robot_ids:
            _, seq = tour(k, site_sets[k])
            by_site: dict[int, list[int]] = {}
            for t in assigned[k]:
                by_site.setdefault(t.site_id, []).append(t.measurement_id)
            for s in seq:
                genes.extend(Gene(s, q, k) for q in sorted(by_site[s]))
        return tuple(genes)

    def dfs(pos: int):
        counter[0] += 1
        if counter[0] & 0x3FF == 0 and time.monotonic() > deadline:
            raise OracleTimeout(f"oracle exceeded {bounds.time_limit_s}s")
        if pos == len(order):
            costs = [tour(k, site_sets[k])[0] for k in robot_ids]
            if any(c > budgets[k] + _EPS for c, k in zip(costs, robot_ids)):
                return
            value = combine(costs)
            if math.isinf(value):
                return
            if value < incumbent[0] - _EPS:
                incumbent[0], incumbent[1] = value, canonical()
            elif value <= incumbent[0] + _EPS:
                genes = canonical()
                if genes < incumbent[1]:
                    incumbent[1] = genes
            return
        ti = order[pos]
        t = tasks[ti]
        for k in capable[ti]:
            prev = site_sets[k]
            site_sets[k] = prev | {t.site_id}
            assigned[k].append(t)
            ok = True
            if prune:
                ck = tour(k, site_sets[k])[0]
                if ck > budgets[k] + _EPS:
                    ok = False
                else:
                    bound = combine([tour(r, site_sets[r])[0] for r in robot_ids])
                    ok = bound <= incumbent[0] + _EPS
            if ok:
                dfs(pos + 1)
            assigned[k].pop()
            site_sets[k] = prev

    dfs(0)
    if incumbent[1] is None:
        raise InfeasibleError("infeasible: no assignment covers all tasks within budgets")
    return AllocationSolution(incumbent[1]), float(incumbent[0])
