"""Genetic algorithm over three-line (site, measurement, robot) chromosomes.

Internally an individual is a pair ``(order, assign)``: ``order`` is the
chromosome's task sequence as task indices and ``assign[t]`` is the robot
index holding task ``t``.  Only capable robots are ever drawn, so every
individual satisfies the sensor constraint by construction.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, fields

from .allocation import AllocationSolution, FastEvaluator, TaskIndex
from .grid import CostTensor
from .mission import MINSUM, MissionSpec


class UncoverableTaskError(ValueError):
    pass


@dataclass(frozen=True)
class GaParams:
    population: int = 100
    generations: int = 500
    crossover_prob: float = 0.9
    mutation_prob: float = 0.1
    tournament: int = 2
    elitism: int = 1
    penalty: float = 1e3  # math.inf rejects budget-infeasible individuals outright
    seed: int = 0
    two_opt_each_generation: bool = False

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for name in ("crossover_prob", "mutation_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.penalty < 0:
            raise ValueError("penalty must be >= 0")
        if self.tournament < 1 or not 0 <= self.elitism < self.population:
            raise ValueError("tournament must be >= 1 and 0 <= elitism < population")

    @property
    def strict(self) -> bool:
        return math.isinf(self.penalty)

    @classmethod
    def from_mapping(cls, data: dict | None, **overrides) -> GaParams:
        known = {f.name for f in fields(cls)}
        kw = {k: v for k, v in (data or {}).items() if k in known}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        if kw.get("penalty") in ("inf", "strict"):
            kw["penalty"] = math.inf
        return cls(**kw)


Individual = tuple[tuple[int, ...], tuple[int, ...]]


@dataclass
class GaResult:
    best: AllocationSolution
    fitness: float
    objective_value: float
    feasible: bool
    history: list[float] = field(default_factory=list)


def _check_coverable(index: TaskIndex):
    for t, cap in zip(index.tasks, index.capable):
        if not cap:
            raise UncoverableTaskError(
                f"uncoverable task (a{t.site_id}, m{t.measurement_id}): no robot holds m{t.measurement_id}")


def _random_individual(index: TaskIndex, rng: random.Random) -> Individual:
    order = list(range(len(index.tasks)))
    rng.shuffle(order)
    assign = tuple(rng.choice(cap) for cap in index.capable)
    return tuple(order), assign


def init_population(spec: MissionSpec, params: GaParams, rng: random.Random | None = None) -> list[AllocationSolution]:
    index = TaskIndex(spec)
    _check_coverable(index)
    rng = rng or random.Random(params.seed)
    return [index.to_solution(*_random_individual(index, rng)) for _ in range(params.population)]


def _order_crossover(pa: tuple[int, ...], pb: tuple[int, ...], i: int, j: int) -> list[int]:
    n = len(pa)
    child: list[int | None] = [None] * n
    child[i:j] = pa[i:j]
    kept = set(pa[i:j])
    fill = [pb[(j + s) % n] for s in range(n) if pb[(j + s) % n] not in kept]
    pos = [(j + s) % n for s in range(n) if child[(j + s) % n] is None]
    for p, t in zip(pos, fill):
        child[p] = t
    return child  # type: ignore[return-value]


def _crossover(a: Individual, b: Individual, rng: random.Random, capable) -> tuple[Individual, Individual]:
    (oa, ra), (ob, rb) = a, b
    n = len(oa)
    # effect 1: swap robot assignments on a uniform random subset of tasks
    ca, cb = list(ra), list(rb)
    for t in range(n):
        if rng.random() < 0.5:
            ca[t], cb[t] = cb[t], ca[t]
            if ca[t] not in capable[t]:
                ca[t] = rng.choice(capable[t])
            if cb[t] not in capable[t]:
                cb[t] = rng.choice(capable[t])
    # effect 2: order crossover on the task sequence
    if n >= 2:
        i, j = sorted(rng.sample(range(n + 1), 2))
        na = _order_crossover(oa, ob, i, j)
        nb = _order_crossover(ob, oa, i, j)
    else:
        na, nb = list(oa), list(ob)
    return (tuple(na), tuple(ca)), (tuple(nb), tuple(cb))


def _mutate(ind: Individual, rng: random.Random, capable) -> Individual:
    order, assign = list(ind[0]), list(ind[1])
    n = len(order)
    if n == 0:
        return ind
    t = order[rng.randrange(n)]
    assign[t] = rng.choice(capable[t])
    if rng.random() < 0.5:
        i, j = rng.randrange(n), rng.randrange(n)
        order[i], order[j] = order[j], order[i]
    return tuple(order), tuple(assign)


def crossover(parent_a: AllocationSolution, parent_b: AllocationSolution, rng: random.Random,
              spec: MissionSpec) -> tuple[AllocationSolution, AllocationSolution]:
    index = TaskIndex(spec)
    a = tuple(map(tuple, index.from_solution(parent_a)))
    b = tuple(map(tuple, index.from_solution(parent_b)))
    ca, cb = _crossover(a, b, rng, index.capable)
    return index.to_solution(*ca), index.to_solution(*cb)


def mutate(individual: AllocationSolution, spec: MissionSpec, rng: random.Random) -> AllocationSolution:
    index = TaskIndex(spec)
    ind = tuple(map(tuple, index.from_solution(individual)))
    return index.to_solution(*_mutate(ind, rng, index.capable))


def run_ga(spec: MissionSpec, tensor: CostTensor, params: GaParams = GaParams(),
           objective: str | None = None) -> GaResult:
    """Evolve a population; return the best budget-feasible individual ever seen.

    Fitness is the objective plus ``penalty`` times the summed budget excess.
    When no feasible individual ever appears the best penalised one is
    returned with ``feasible=False``.
    """
    objective = objective or spec.objective
    ev = FastEvaluator(spec, tensor)
    _check_coverable(ev)
    rng = random.Random(params.seed)
    capable = ev.capable
    minsum = objective == MINSUM
    penalty = params.penalty
    cache: dict[Individual, tuple[float, float, float]] = {}

    def score(ind: Individual) -> tuple[float, float, float]:
        hit = cache.get(ind)
        if hit is None:
            costs = ev.route_costs(ind[0], ind[1])
            obj = sum(costs) if minsum else max(costs, default=0.0)
            excess = ev.budget_excess(costs)
            fit = obj if excess <= 0 else obj + penalty * excess
            hit = cache[ind] = (fit, obj, excess)
        return hit

    polish = None
    if params.two_opt_each_generation:
        from .twoopt import refine

        def polish(ind: Individual) -> Individual:
            sol, _ = refine(ev.to_solution(*ind), spec, tensor)
            return tuple(map(tuple, ev.from_solution(sol)))

    pop = [_random_individual(ev, rng) for _ in range(params.population)]
    history: list[float] = []
    best_feasible: tuple[float, Individual] | None = None
    best_any: tuple[float, Individual] | None = None

    def tournament(fits):
        best = None
        for _ in range(params.tournament):
            i = rng.randrange(len(fits))
            if best is None or fits[i] < fits[best] or (fits[i] == fits[best] and i < best):
                best = i
        return best

    for gen in range(params.generations):
        if gen > 0:
            ranked = sorted(range(len(pop)), key=lambda i: (fits[i], i))
            nxt = [pop[i] for i in ranked[:params.elitism]]
            if polish is not None and nxt:
                nxt[0] = polish(nxt[0])
            while len(nxt) < params.population:
                a, b = pop[tournament(fits)], pop[tournament(fits)]
                if rng.random() < params.crossover_prob:
                    a, b = _crossover(a, b, rng, capable)
                if rng.random() < params.mutation_prob:
                    a = _mutate(a, rng, capable)
                if rng.random() < params.mutation_prob:
                    b = _mutate(b, rng, capable)
                nxt.append(a)
                if len(nxt) < params.population:
                    nxt.append(b)
            pop = nxt
        scores = [score(ind) for ind in pop]
        fits = [s[0] for s in scores]
        for ind, (fit, obj, excess) in zip(pop, scores):
            if excess <= 0 and not math.isinf(obj):
                if best_feasible is None or obj < best_feasible[0]:
                    best_feasible = (obj, ind)
            if best_any is None or fit < best_any[0]:
                best_any = (fit, ind)
        history.append(min(fits))

    if best_feasible is not None:
        ind = best_feasible[1]
        feasible = True
    else:
        ind = best_any[1]
        feasible = False
    fit, obj, _ = score(ind)
    return GaResult(ev.to_solution(*ind), fit, obj, feasible, history)
