"""CPLEX-LP export of the allocation MILP for external solvers.

Variables
  x_i_j_k   binary, robot k travels a_i -> a_j.  x_1_1_k is a zero-cost
            depot self-loop so an unused robot can meet its departure row
            without leaving; every other self-loop is forced to 0 by its
            sequencing row.
  u_i_k     integer visit rank, u_1_k = 0 and u_j_k in [1, A-1].
  z         MinMax only, upper bound on every robot's route cost.

Rows: eq3_k one departure from the depot, eq4_i_k flow conservation,
eq5_i_j_k MTZ sequencing, eq6_k budget, eq7_q_j measurement coverage,
minmax_k route cost bounded by z.  Legs that are unreachable on the grid get their
x variable fixed to 0 and are left out of every cost row.
"""

from __future__ import annotations

import math

from .grid import CostTensor
from .mission import MINSUM, MissionSpec

_WRAP = 8  # terms per line


def _fmt(c: float) -> str:
    return repr(int(c)) if float(c).is_integer() else repr(float(c))


def _expr(terms: list[tuple[float, str]]) -> str:
    parts = []
    for n, (c, v) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = v if mag == 1 else f"{_fmt(mag)} {v}"
        if n == 0:
            parts.append(("- " if c < 0 else "") + body)
        else:
            parts.append(f"{sign} {body}")
    lines = [" ".join(parts[i:i + _WRAP]) for i in range(0, len(parts), _WRAP)]
    return "\n   ".join(lines)


def export_milp(spec: MissionSpec, tensor: CostTensor, objective: str | None = None) -> str:
    objective = objective or spec.objective
    sites = sorted(s.id for s in spec.sites)
    robots = sorted(r.id for r in spec.robots)
    meas = sorted(m.id for m in spec.measurements)
    depot = spec.depot.id
    A = len(sites)
    tasks = {(t.site_id, t.measurement_id) for t in spec.tasks}

    def x(i, j, k):
        return f"x_{i}_{j}_{k}"

    def u(i, k):
        return f"u_{i}_{k}"

    def cost_terms(k):
        return [(tensor.cost(i, j, k), x(i, j, k)) for i in sites for j in sites
                if i != j and not math.isinf(tensor.cost(i, j, k)) and tensor.cost(i, j, k) != 0]

    unreachable = [x(i, j, k) for k in robots for i in sites for j in sites
                   if i != j and math.isinf(tensor.cost(i, j, k))]
    finite_total = {k: sum(c for c, _ in cost_terms(k)) for k in robots}

    out = [
        "\\ Multi-robot task allocation MILP",
        f"\\ sites A={A} (depot a{depot}), robots R={len(robots)}, measurements M={len(meas)}, tasks T={len(tasks)}",
        f"\\ objective: {objective}",
        f"\\ x_{depot}_{depot}_k is a zero-cost depot self-loop: an unused robot takes it to stay home",
        "\\ infinite budgets are written as the sum of all finite leg costs (never binding)",
    ]
    if objective == MINSUM:
        obj = [t for k in robots for t in cost_terms(k)]
        out += ["Minimize", " obj: " + (_expr(obj) if obj else f"0 {x(depot, depot, robots[0])}")]
    else:
        out += ["Minimize", " obj: z"]
    out.append("Subject To")

    for k in robots:
        out.append(f" eq3_{k}: " + _expr([(1, x(depot, j, k)) for j in sites]) + " = 1")
    for k in robots:
        for i in sites:
            terms = [(1, x(i, j, k)) for j in sites if j != i] + [(-1, x(j, i, k)) for j in sites if j != i]
            out.append(f" eq4_{i}_{k}: " + _expr(terms) + " = 0")
    for k in robots:
        for i in sites:
            for j in sites:
                if j == depot:
                    continue
                # u_i + x_ij <= u_j + (A-1)(1 - x_ij)  <=>  u_i - u_j + A x_ij <= A-1
                if i == j:
                    terms = [(A, x(i, j, k))]
                else:
                    terms = [(1, u(i, k)), (-1, u(j, k)), (A, x(i, j, k))]
                out.append(f" eq5_{i}_{j}_{k}: " + _expr(terms) + f" <= {A - 1}")
    for k in robots:
        budget = spec.robot(k).budget
        rhs = finite_total[k] if math.isinf(budget) else budget
        terms = cost_terms(k) or [(0, x(depot, depot, k))]
        out.append(f" eq6_{k}: " + _expr(terms) + f" <= {_fmt(rhs)}")
    for q in meas:
        for j in sites:
            terms = [(1, x(i, j, k)) for k in robots if q in spec.robot(k).sensors
                     for i in sites if i != j]
            rhs = 1 if (j, q) in tasks else 0
            if not terms:
                terms = [(0, x(depot, depot, robots[0]))]
            out.append(f" eq7_{q}_{j}: " + _expr(terms) + f" >= {rhs}")
    if objective != MINSUM:
        for k in robots:
            out.append(f" minmax_{k}: " + _expr(cost_terms(k) + [(-1, "z")]) + " <= 0")

    out.append("Bounds")
    for k in robots:
        out.append(f" 0 <= {u(depot, k)} <= 0")
        for i in sites:
            if i != depot:
                out.append(f" 1 <= {u(i, k)} <= {A - 1}")
    for v in unreachable:
        out.append(f" 0 <= {v} <= 0")
    if objective != MINSUM:
        out.append(f" 0 <= z <= {_fmt(max(finite_total.values(), default=0))}")

    out.append("Binaries")
    xs = [x(i, j, k) for k in robots for i in sites for j in sites]
    out += [" " + " ".join(xs[n:n + _WRAP]) for n in range(0, len(xs), _WRAP)]
    out.append("Generals")
    us = [u(i, k) for k in robots for i in sites]
    out += [" " + " ".join(us[n:n + _WRAP]) for n in range(0, len(us), _WRAP)]
    out.append("End")
    return "\n".join(out) + "\n"
