"""Static mission description: grid, sites, measurement types, tasks, robots.

Mission files are JSON documents.  Loading never rejects a structurally
parseable file because of a broken invariant; call :func:`validate_mission`
to get the list of problems.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .grid import GridMap

MISSION_VERSION = 1

MINSUM = "minsum"
MINMAX = "minmax"
OBJECTIVES = (MINSUM, MINMAX)
COST_UNITS = ("EU", "TU")


class MissionFormatError(ValueError):
    """The mission document cannot be turned into a MissionSpec."""


class UnknownIdError(KeyError):
    pass


@dataclass(frozen=True)
class MeasurementType:
    id: int
    label: str


@dataclass(frozen=True)
class Site:
    id: int
    cell: tuple[int, int]
    is_depot: bool = False


@dataclass(frozen=True, order=True)
class Task:
    site_id: int
    measurement_id: int


@dataclass(frozen=True)
class Robot:
    id: int
    sensors: frozenset[int]
    budget: float = math.inf
    max_speed: tuple[float, float, float] = (3.0, 3.0, 2.0)
    max_attitude: tuple[float, float, float] = (0.3, 0.3, 3.0)


@dataclass(frozen=True)
class MissionSpec:
    grid: GridMap
    sites: tuple[Site, ...]
    measurements: tuple[MeasurementType, ...]
    tasks: tuple[Task, ...]
    robots: tuple[Robot, ...]
    objective: str = MINSUM
    cost_unit: str = "EU"
    # optional raw config blocks: ga, control, avoidance, sim
    settings: dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def depot(self) -> Site:
        for s in self.sites:
            if s.is_depot:
                return s
        raise MissionFormatError("mission has no depot")

    def site(self, site_id: int) -> Site:
        for s in self.sites:
            if s.id == site_id:
                return s
        raise UnknownIdError(f"unknown id: site {site_id}")

    def robot(self, robot_id: int) -> Robot:
        for r in self.robots:
            if r.id == robot_id:
                return r
        raise UnknownIdError(f"unknown id: robot {robot_id}")

    def capable_robots(self, measurement_id: int) -> list[int]:
        return [r.id for r in self.robots if measurement_id in r.sensors]

    def with_objective(self, objective: str) -> MissionSpec:
        if objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        return MissionSpec(self.grid, self.sites, self.measurements, self.tasks,
                           self.robots, objective, self.cost_unit, self.settings)

    def without_robot(self, robot_id: int) -> MissionSpec:
        robots = tuple(r for r in self.robots if r.id != robot_id)
        return MissionSpec(self.grid, self.sites, self.measurements, self.tasks,
                           robots, self.objective, self.cost_unit, self.settings)


def capability(spec: MissionSpec, robot_id: int, measurement_id: int) -> bool:
    """p(k, q): whether robot ``robot_id`` carries a sensor for ``measurement_id``."""
    robot = spec.robot(robot_id)
    if measurement_id not in {m.id for m in spec.measurements}:
        raise UnknownIdError(f"unknown id: measurement {measurement_id}")
    return measurement_id in robot.sensors


def validate_mission(spec: MissionSpec) -> list[str]:
    """Return every violated invariant as ``"<kind>: <locus>"``; empty means valid."""
    out: list[str] = []
    grid = spec.grid

    if grid.nx < 1 or grid.ny < 1:
        out.append(f"grid size: nx={grid.nx}, ny={grid.ny} must both be >= 1")
    if grid.cell_size_m <= 0:
        out.append(f"grid cell size: {grid.cell_size_m} must be > 0")
    for c in sorted(grid.obstacles):
        if not grid.in_bounds(c):
            out.append(f"obstacle out of bounds: cell {list(c)}")

    if len(spec.sites) < 2:
        out.append(f"site count: A={len(spec.sites)} must be >= 2")
    depots = [s for s in spec.sites if s.is_depot]
    if len(depots) != 1:
        out.append(f"depot multiplicity: expected exactly one depot, found {len(depots)}")
    elif depots[0].id != 1:
        out.append(f"depot id: depot is site {depots[0].id}, must be site 1")
    site_ids = [s.id for s in spec.sites]
    if sorted(site_ids) != list(range(1, len(site_ids) + 1)):
        out.append(f"site ids: {site_ids} are not contiguous from 1")
    for s in spec.sites:
        if not grid.in_bounds(s.cell):
            out.append(f"site cell out of bounds: site {s.id} at {list(s.cell)}")
        elif s.cell in grid.obstacles:
            out.append(f"site on obstacle: site {s.id} at {list(s.cell)}")

    m_ids = [m.id for m in spec.measurements]
    if sorted(m_ids) != list(range(1, len(m_ids) + 1)):
        out.append(f"measurement ids: {m_ids} are not contiguous from 1")
    labels = [m.label for m in spec.measurements]
    if len(set(labels)) != len(labels):
        out.append("measurement labels: labels are not unique")

    if len(spec.robots) < 1:
        out.append("robot count: R=0 must be >= 1")
    r_ids = [r.id for r in spec.robots]
    if sorted(r_ids) != list(range(1, len(r_ids) + 1)):
        out.append(f"robot ids: {r_ids} are not contiguous from 1")
    known_m = set(m_ids)
    for r in spec.robots:
        unknown = sorted(set(r.sensors) - known_m)
        if unknown:
            out.append(f"robot sensors: robot {r.id} lists unknown measurements {unknown}")
        if not r.budget >= 0:
            out.append(f"robot budget: robot {r.id} budget {r.budget} must be >= 0")
        if any(not v > 0 for v in (*r.max_speed, *r.max_attitude)):
            out.append(f"robot kinematic bounds: robot {r.id} bounds must all be > 0")

    known_s = set(site_ids)
    depot_ids = {s.id for s in depots}
    seen: set[Task] = set()
    for t in spec.tasks:
        where = f"task (a{t.site_id}, m{t.measurement_id})"
        if t.site_id not in known_s:
            out.append(f"task site: {where} references an unknown site")
        if t.measurement_id not in known_m:
            out.append(f"task measurement: {where} references an unknown measurement")
        if t.site_id in depot_ids:
            out.append(f"task at depot: {where}")
        if t in seen:
            out.append(f"duplicate task: {where}")
        seen.add(t)

    # one violation per measurement type nobody can perform
    by_m: dict[int, list[Task]] = {}
    for t in spec.tasks:
        if t.measurement_id in known_m and not spec.capable_robots(t.measurement_id):
            by_m.setdefault(t.measurement_id, []).append(t)
    for q in sorted(by_m):
        names = ", ".join(f"(a{t.site_id}, m{t.measurement_id})" for t in by_m[q])
        out.append(f"uncoverable task: no robot holds m{q}; affects {names}")

    if spec.objective not in OBJECTIVES:
        out.append(f"objective: {spec.objective!r} is not one of {list(OBJECTIVES)}")
    if spec.cost_unit not in COST_UNITS:
        out.append(f"cost unit: {spec.cost_unit!r} is not one of {list(COST_UNITS)}")
    return out


# --- JSON (de)serialisation -------------------------------------------------

def _budget_from_json(v) -> float:
    if v is None or v == "inf":
        return math.inf
    return float(v)


def mission_from_dict(doc: dict[str, Any]) -> MissionSpec:
    try:
        version = doc.get("version")
        if version != MISSION_VERSION:
            raise MissionFormatError(f"unsupported mission version {version!r}")
        g = doc["grid"]
        grid = GridMap(
            nx=int(g["nx"]),
            ny=int(g["ny"]),
            cell_size_m=float(g.get("cell_size_m", 1.0)),
            obstacles=frozenset((int(x), int(y)) for x, y in g.get("obstacles", [])),
            connectivity=g.get("connectivity", "four"),
        )
        sites = tuple(
            Site(int(s["id"]), (int(s["cell"][0]), int(s["cell"][1])), bool(s.get("depot", False)))
            for s in doc["sites"]
        )
        measurements = tuple(MeasurementType(int(m["id"]), str(m["label"])) for m in doc["measurements"])
        tasks = tuple(Task(int(t["site"]), int(t["measurement"])) for t in doc["tasks"])
        robots = []
        for r in doc["robots"]:
            kw = {}
            if "max_speed" in r:
                kw["max_speed"] = tuple(float(v) for v in r["max_speed"])
            if "max_attitude" in r:
                kw["max_attitude"] = tuple(float(v) for v in r["max_attitude"])
            robots.append(Robot(int(r["id"]), frozenset(int(q) for q in r["sensors"]),
                                _budget_from_json(r.get("budget")), **kw))
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        if isinstance(exc, MissionFormatError):
            raise
        raise MissionFormatError(f"malformed mission document: {exc!r}") from exc
    settings = {k: doc[k] for k in ("ga", "control", "avoidance", "sim") if k in doc}
    return MissionSpec(grid, sites, measurements, tasks, tuple(robots),
                       str(doc.get("objective", MINSUM)).lower(), str(doc.get("cost_unit", "EU")),
                       settings)


def mission_to_dict(spec: MissionSpec) -> dict[str, Any]:
    g = spec.grid
    doc: dict[str, Any] = {
        "version": MISSION_VERSION,
        "grid": {"nx": g.nx, "ny": g.ny, "cell_size_m": g.cell_size_m,
                 "connectivity": g.connectivity,
                 "obstacles": [list(c) for c in sorted(g.obstacles)]},
        "sites": [{"id": s.id, "cell": list(s.cell), "depot": s.is_depot} for s in spec.sites],
        "measurements": [{"id": m.id, "label": m.label} for m in spec.measurements],
        "tasks": [{"site": t.site_id, "measurement": t.measurement_id} for t in spec.tasks],
        "robots": [
            {"id": r.id, "sensors": sorted(r.sensors),
             "budget": None if math.isinf(r.budget) else r.budget,
             "max_speed": list(r.max_speed), "max_attitude": list(r.max_attitude)}
            for r in spec.robots
        ],
        "objective": spec.objective,
        "cost_unit": spec.cost_unit,
    }
    doc.update(spec.settings)
    return doc


def load_mission(path: str | Path) -> MissionSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MissionFormatError(f"{path}: not valid JSON ({exc})") from exc
    return mission_from_dict(doc)


def dump_mission(spec: MissionSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(mission_to_dict(spec), indent=2) + "\n")
