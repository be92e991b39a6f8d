"""Independent reference implementations used to cross-check the package.

None of these import the code under test; each solves the same question by
a different, deliberately naive route.
"""

from __future__ import annotations

import itertools
import math
import re
from collections import deque


def bfs_distances(nx, ny, obstacles, source):
    """Layer count from ``source`` over 4-connected free cells."""
    dist = {source: 0}
    q = deque([source])
    while q:
        x, y = q.popleft()
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (x + dx, y + dy)
            if 0 <= n[0] < nx and 0 <= n[1] < ny and n not in obstacles and n not in dist:
                dist[n] = dist[(x, y)] + 1
                q.append(n)
    return dist


def tour_cost(matrix, tour):
    return sum(matrix[a][b] for a, b in zip(tour, tour[1:]))


def best_permutation_cost(matrix, depot, interior):
    """Cheapest closed walk depot -> all interior nodes -> depot (0-based matrix)."""
    best = math.inf
    for perm in itertools.permutations(interior):
        best = min(best, tour_cost(matrix, [depot, *perm, depot]))
    return best


def brute_force_allocation(tasks, capable, site_of, matrix_of, objective):
    """Exhaustive assignment x per-robot permutation search.

    ``tasks``: list of task keys; ``capable[t]``: robot ids; ``site_of[t]``: 0-based site;
    ``matrix_of[k]``: 0-based cost matrix for robot k.  Depot is index 0.
    """
    robots = sorted(matrix_of)
    best = math.inf
    for assign in itertools.product(*(capable[t] for t in tasks)):
        costs = []
        for k in robots:
            sites = sorted({site_of[t] for t, r in zip(tasks, assign) if r == k})
            costs.append(best_permutation_cost(matrix_of[k], 0, sites) if sites else 0.0)
        value = sum(costs) if objective == "minsum" else max(costs)
        best = min(best, value)
    return best


# --- scripted controller / plant traces -------------------------------------------

def scripted_pid(errors, dt, k1, k2, k3, cap, knee, offset=0.0, ticks=5.0):
    """Hand-unrolled saturated PID: trapezoid integral clamped at knee/k2, low-passed derivative."""
    out = []
    integ = 0.0
    deriv = 0.0
    prev = None
    alpha = 1.0 / (ticks + 1.0)
    for e in errors:
        if prev is not None:
            integ = integ + dt * (e + prev) / 2.0
            deriv = deriv + alpha * ((e - prev) / dt - deriv)
        if k2:
            integ = max(-knee / abs(k2), min(knee / abs(k2), integ))
        prev = e
        s = k1 * e + k2 * integ + k3 * deriv
        if s > knee:
            y = offset + cap
        elif s < -knee:
            y = offset - cap
        else:
            y = offset + cap * s / knee
        out.append(y)
    return out


def scripted_pitch_response(theta_cmd, dt, tau, duration, g=9.81):
    """Forward speed after holding a pitch command from rest, first-order attitude lag."""
    a = 1.0 - math.exp(-dt / tau)
    theta = 0.0
    v = 0.0
    for _ in range(round(duration / dt)):
        theta += a * (theta_cmd - theta)
        v += g * math.tan(theta) * dt
    return v


# --- geodesy ------------------------------------------------------------------

def law_of_cosines_m(lat1, lon1, lat2, lon2, radius=6_371_000.0):
    from mpmath import mp, mpf, acos, cos, sin, radians
    mp.dps = 50
    p1, p2 = radians(mpf(lat1)), radians(mpf(lat2))
    dl = radians(mpf(lon2) - mpf(lon1))
    c = sin(p1) * sin(p2) + cos(p1) * cos(p2) * cos(dl)
    return float(mpf(radius) * acos(min(mpf(1), c)))


# --- LP text scanner ------------------------------------------------------------

_SECTIONS = ("minimize", "maximize", "subject to", "bounds", "binaries", "generals", "end")
_VAR = re.compile(r"\b([xuz](?:_\d+)*)\b")


def scan_lp(text):
    """Split a CPLEX-LP file into sections and collect row names and variables."""
    section = None
    rows: dict[str, str] = {}
    current = None
    bounds: dict[str, tuple[float, float]] = {}
    binaries: set[str] = set()
    generals: set[str] = set()
    objective = ""
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        if line.lower() in _SECTIONS:
            section = line.lower()
            continue
        if section == "minimize":
            objective += " " + line
        elif section == "subject to":
            m = re.match(r"(\w+):\s*(.*)", line)
            if m:
                current = m.group(1)
                rows[current] = m.group(2)
            else:
                rows[current] += " " + line
        elif section == "bounds":
            m = re.match(r"(\S+)\s*<=\s*(\S+)\s*<=\s*(\S+)", line)
            bounds[m.group(2)] = (float(m.group(1)), float(m.group(3)))
        elif section == "binaries":
            binaries.update(line.split())
        elif section == "generals":
            generals.update(line.split())
    return {"objective": objective, "rows": rows, "bounds": bounds,
            "binaries": binaries, "generals": generals}


def lp_row_variables(row_text):
    return set(_VAR.findall(row_text.split("<=")[0].split(">=")[0].split("=")[0]))
