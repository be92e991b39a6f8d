"""Three-line chromosome, derived per-robot routes, C1/C2 and constraint checks."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .grid import CostTensor
from .mission import MINMAX, MINSUM, MissionSpec, Task


class DisconnectedRouteError(ValueError):
    def __init__(self, robot_id: int, leg: tuple[int, int]):
        super().__init__(f"disconnected route: robot {robot_id} cannot travel a{leg[0]} -> a{leg[1]}")
        self.robot_id = robot_id
        self.leg = leg


@dataclass(frozen=True, order=True)
class Gene:
    site: int
    measurement: int
    robot: int

    @property
    def task(self) -> Task:
        return Task(self.site, self.measurement)


@dataclass(frozen=True)
class AllocationSolution:
    genes: tuple[Gene, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "genes", tuple(self.genes))

    def genes_of(self, robot_id: int) -> list[Gene]:
        return [g for g in self.genes if g.robot == robot_id]

    def robots_used(self) -> list[int]:
        return sorted({g.robot for g in self.genes})

    def assignment(self) -> Counter:
        return Counter((g.task, g.robot) for g in self.genes)


@dataclass
class Violation:
    kind: str  # capability | budget | coverage | disconnected | robot
    detail: str
    excess: float = 0.0


@dataclass
class EvaluationReport:
    per_robot_cost: list[float]
    c1: float
    c2: float
    violations: list[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def objective(self, name: str) -> float:
        return self.c1 if name == MINSUM else self.c2

    def budget_excess(self) -> float:
        return sum(v.excess for v in self.violations if v.kind == "budget")


def route_nodes(solution: AllocationSolution, robot_id: int) -> list[tuple[int, list[Gene]]]:
    """Interior route nodes of one robot: consecutive genes at the same site form one node."""
    nodes: list[tuple[int, list[Gene]]] = []
    for g in solution.genes:
        if g.robot != robot_id:
            continue
        if nodes and nodes[-1][0] == g.site:
            nodes[-1][1].append(g)
        else:
            nodes.append((g.site, [g]))
    return nodes


def sequence_cost(seq: Sequence[int], robot_id: int, tensor: CostTensor) -> float:
    row = tensor.rows[robot_id - 1]
    return sum(row[a - 1][b - 1] for a, b in zip(seq, seq[1:]))


def route_of(solution: AllocationSolution, robot_id: int, tensor: CostTensor,
             depot: int = 1) -> tuple[list[int], float]:
    """Closed walk depot -> robot's sites in chromosome order -> depot, and its cost."""
    nodes = route_nodes(solution, robot_id)
    if not nodes:
        return [depot], 0.0
    seq = [depot] + [s for s, _ in nodes] + [depot]
    row = tensor.rows[robot_id - 1]
    cost = 0.0
    for a, b in zip(seq, seq[1:]):
        c = row[a - 1][b - 1]
        if math.isinf(c):
            raise DisconnectedRouteError(robot_id, (a, b))
        cost += c
    return seq, cost


def evaluate(solution: AllocationSolution, spec: MissionSpec, tensor: CostTensor) -> EvaluationReport:
    violations: list[Violation] = []
    robot_ids = sorted(r.id for r in spec.robots)
    known = set(robot_ids)
    depot = spec.depot.id

    for g in solution.genes:
        if g.robot not in known:
            violations.append(Violation("robot", f"gene {g} names unknown robot r{g.robot}"))
        elif g.measurement not in spec.robot(g.robot).sensors:
            violations.append(Violation(
                "capability", f"r{g.robot} has no sensor for m{g.measurement} (task at a{g.site})"))

    required = Counter(spec.tasks)
    present = Counter(g.task for g in solution.genes)
    for t in sorted(required):
        if present[t] == 0:
            violations.append(Violation("coverage", f"missing task (a{t.site_id}, m{t.measurement_id})"))
        elif present[t] > 1:
            violations.append(Violation("coverage", f"duplicate task (a{t.site_id}, m{t.measurement_id}) x{present[t]}"))
    for t in sorted(set(present) - set(required)):
        violations.append(Violation("coverage", f"unknown task (a{t.site_id}, m{t.measurement_id})"))

    costs = []
    for k in robot_ids:
        try:
            _, cost = route_of(solution, k, tensor, depot)
        except DisconnectedRouteError as exc:
            violations.append(Violation("disconnected", str(exc)))
            cost = math.inf
        costs.append(cost)
        budget = spec.robot(k).budget
        if cost > budget and not math.isinf(cost):
            violations.append(Violation("budget", f"r{k} route cost {cost:g} exceeds budget {budget:g}",
                                        excess=cost - budget))
    return EvaluationReport(costs, sum(costs), max(costs, default=0.0), violations)


class TaskIndex:
    """Integer view of a mission for tight loops.

    Tasks are numbered 0..T-1 in sorted order; an individual is an ``order``
    (permutation of task indices) plus ``assign`` (robot index per task).
    """

    def __init__(self, spec: MissionSpec):
        self.spec = spec
        self.tasks: list[Task] = sorted(spec.tasks)
        self.task_site = [t.site_id - 1 for t in self.tasks]
        self.robot_ids = sorted(r.id for r in spec.robots)
        self.budgets = [spec.robot(k).budget for k in self.robot_ids]
        self.capable = [[ri for ri, k in enumerate(self.robot_ids)
                         if t.measurement_id in spec.robot(k).sensors] for t in self.tasks]
        self.depot = spec.depot.id - 1

    def to_solution(self, order: Sequence[int], assign: Sequence[int]) -> AllocationSolution:
        return AllocationSolution(tuple(
            Gene(self.tasks[t].site_id, self.tasks[t].measurement_id, self.robot_ids[assign[t]])
            for t in order))

    def from_solution(self, solution: AllocationSolution) -> tuple[list[int], list[int]]:
        index = {t: i for i, t in enumerate(self.tasks)}
        rindex = {k: i for i, k in enumerate(self.robot_ids)}
        order = [index[g.task] for g in solution.genes]
        assign = [0] * len(self.tasks)
        for g in solution.genes:
            assign[index[g.task]] = rindex[g.robot]
        return order, assign


class FastEvaluator(TaskIndex):
    def __init__(self, spec: MissionSpec, tensor: CostTensor):
        super().__init__(spec)
        self.tensor = tensor
        self.rows = [tensor.rows[k - 1] for k in self.robot_ids]

    def route_costs(self, order: Sequence[int], assign: Sequence[int]) -> list[float]:
        R = len(self.robot_ids)
        depot = self.depot
        last = [depot] * R
        cost = [0.0] * R
        rows = self.rows
        sites = self.task_site
        for t in order:
            k = assign[t]
            s = sites[t]
            if s != last[k]:
                cost[k] += rows[k][last[k]][s]
                last[k] = s
        for k in range(R):
            if last[k] != depot:
                cost[k] += rows[k][last[k]][depot]
        return cost

    def budget_excess(self, costs: Iterable[float]) -> float:
        return sum(c - b for c, b in zip(costs, self.budgets) if c > b)


# --- solution file ------------------------------------------------------------

def _num(v: float):
    return None if math.isinf(v) else v


def solution_to_dict(solution: AllocationSolution, spec: MissionSpec, tensor: CostTensor,
                     objective: str | None = None) -> dict:
    report = evaluate(solution, spec, tensor)
    per_robot = []
    for k, cost in zip(sorted(r.id for r in spec.robots), report.per_robot_cost):
        try:
            seq, _ = route_of(solution, k, tensor, spec.depot.id)
        except DisconnectedRouteError:
            seq = [spec.depot.id] + [s for s, _ in route_nodes(solution, k)] + [spec.depot.id]
        per_robot.append({"robot": k, "route": seq, "cost": _num(cost)})
    return {
        "objective": objective or spec.objective,
        "genes": [{"site": g.site, "measurement": g.measurement, "robot": g.robot} for g in solution.genes],
        "c1": _num(report.c1),
        "c2": _num(report.c2),
        "feasible": report.feasible,
        "per_robot": per_robot,
    }


def solution_from_dict(doc: dict) -> AllocationSolution:
    return AllocationSolution(tuple(Gene(int(g["site"]), int(g["measurement"]), int(g["robot"]))
                                    for g in doc["genes"]))


def dump_solution(solution: AllocationSolution, spec: MissionSpec, tensor: CostTensor,
                  path: str | Path, objective: str | None = None) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(solution, spec, tensor, objective), indent=2) + "\n")


def load_solution(path: str | Path) -> AllocationSolution:
    return solution_from_dict(json.loads(Path(path).read_text()))


__all__ = [
    "AllocationSolution", "DisconnectedRouteError", "EvaluationReport", "FastEvaluator", "Gene", "TaskIndex",
    "MINMAX", "MINSUM", "Violation", "dump_solution", "evaluate", "load_solution", "route_nodes",
    "route_of", "sequence_cost", "solution_from_dict", "solution_to_dict",
]
