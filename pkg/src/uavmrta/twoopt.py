"""2-Opt post-processing of each robot's route."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .allocation import (AllocationSolution, DisconnectedRouteError, Gene, route_nodes,
                         sequence_cost)
from .grid import CostTensor
from .mission import MissionSpec

_EPS = 1e-9


@dataclass
class RobotTwoOpt:
    robot: int
    cost_before: float
    cost_after: float
    passes: int
    reversals: int


@dataclass
class TwoOptReport:
    robots: list[RobotTwoOpt] = field(default_factory=list)

    def rows(self):
        return [(r.robot, r.cost_before, r.cost_after, r.passes, r.reversals) for r in self.robots]


def _leg_sum(row, seq, lo, hi):
    return sum(row[seq[p] - 1][seq[p + 1] - 1] for p in range(lo, hi))


def _two_opt(seq: list[int], row) -> tuple[list[int], list[int], int, int]:
    """Best-improvement 2-Opt on a closed depot walk.

    Returns (new sequence, permutation of interior positions, passes, reversals).
    Cost deltas are recomputed over the reversed window, so asymmetric
    tensors are handled too.
    """
    seq = list(seq)
    perm = list(range(len(seq) - 2))  # interior position -> original interior index
    n_int = len(seq) - 2
    if n_int < 3:
        return seq, perm, 1, 0
    passes = reversals = 0
    while True:
        passes += 1
        best_delta, best_ij = -_EPS, None
        for i in range(1, n_int):
            for j in range(i + 1, n_int + 1):
                old = _leg_sum(row, seq, i - 1, j + 1)
                new = row[seq[i - 1] - 1][seq[j] - 1] + row[seq[i] - 1][seq[j + 1] - 1]
                for p in range(i, j):
                    new += row[seq[p + 1] - 1][seq[p] - 1]
                delta = new - old
                if delta < best_delta - 1e-12:
                    best_delta, best_ij = delta, (i, j)
        if best_ij is None:
            return seq, perm, passes, reversals
        i, j = best_ij
        seq[i:j + 1] = seq[i:j + 1][::-1]
        perm[i - 1:j] = perm[i - 1:j][::-1]
        reversals += 1


def _check_route(route: Sequence[int], robot_id: int, row):
    if len(route) < 1 or route[0] != route[-1]:
        raise ValueError("route must start and end at the depot")
    for a, b in zip(route, route[1:]):
        if math.isinf(row[a - 1][b - 1]):
            raise DisconnectedRouteError(robot_id, (a, b))


def two_opt_route(route: Sequence[int], robot_id: int, tensor: CostTensor) -> list[int]:
    """Improved copy of ``route``; depot endpoints stay fixed.

    Routes with fewer than three interior sites are returned unchanged.
    """
    return two_opt_route_stats(route, robot_id, tensor)[0]


def two_opt_route_stats(route: Sequence[int], robot_id: int, tensor: CostTensor):
    row = tensor.rows[robot_id - 1]
    _check_route(route, robot_id, row)
    seq, _, passes, reversals = _two_opt(list(route), row)
    return seq, passes, reversals


def _refine_once(solution: AllocationSolution, spec: MissionSpec, tensor: CostTensor):
    depot = spec.depot.id
    genes = list(solution.genes)
    stats = []
    for k in sorted(r.id for r in spec.robots):
        row = tensor.rows[k - 1]
        nodes = route_nodes(solution, k)
        seq = [depot] + [s for s, _ in nodes] + [depot] if nodes else [depot]
        before = sequence_cost(seq, k, tensor)
        if nodes:
            _check_route(seq, k, row)
            new_seq, perm, passes, revs = _two_opt(seq, row)
        else:
            new_seq, perm, passes, revs = seq, [], 0, 0
        # refill robot k's chromosome slots in the refined node order
        new_genes: list[Gene] = [g for p in perm for g in nodes[p][1]]
        slots = [i for i, g in enumerate(genes) if g.robot == k]
        for slot, g in zip(slots, new_genes):
            genes[slot] = g
        stats.append(RobotTwoOpt(k, before, sequence_cost(new_seq, k, tensor), passes, revs))
    return AllocationSolution(tuple(genes)), stats


def refine(solution: AllocationSolution, spec: MissionSpec, tensor: CostTensor,
           max_rounds: int = 50) -> tuple[AllocationSolution, TwoOptReport]:
    """2-Opt every robot's route, rewrite the chromosome order, keep assignments.

    Repeats until the chromosome stops changing: a reversal can bring two
    visits of the same site next to each other, which merges them into one
    route node and may open further improvements.
    """
    current, stats = _refine_once(solution, spec, tensor)
    first_before = {s.robot: s.cost_before for s in stats}
    totals = {s.robot: [s.passes, s.reversals] for s in stats}
    for _ in range(max_rounds):
        nxt, more = _refine_once(current, spec, tensor)
        if nxt == current:
            break
        for s in more:
            totals[s.robot][0] += s.passes
            totals[s.robot][1] += s.reversals
        current = nxt
    report = TwoOptReport()
    for k in sorted(totals):
        nodes = route_nodes(current, k)
        seq = [spec.depot.id] + [s for s, _ in nodes] + [spec.depot.id] if nodes else [spec.depot.id]
        passes, revs = totals[k]
        report.robots.append(RobotTwoOpt(k, first_before[k], sequence_cost(seq, k, tensor), passes, revs))
    return current, report
