"""Cost-versus-consumption correlation and plot-ready figure series from telemetry."""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .mission import MINSUM
from .sim import TelemetryRecord

MIN_POINTS = 3


@dataclass
class CorrelationPoint:
    robot: int
    site: int
    t: float
    cost: float
    value: float  # cumulative energy (MinSum) or elapsed flight time (MinMax)


@dataclass
class CorrelationReport:
    objective: str
    points: list[CorrelationPoint] = field(default_factory=list)
    per_robot: dict[int, float | None] = field(default_factory=dict)
    pooled: float | None = None

    @property
    def value_label(self) -> str:
        return "cum_energy" if self.objective == MINSUM else "flight_time_s"

    def summary(self) -> str:
        lines = [f"objective: {self.objective} (cumulative cost vs {self.value_label})"]
        for k, rho in sorted(self.per_robot.items()):
            lines.append(f"  robot {k}: rho = {fmt_rho(rho)}")
        lines.append(f"pooled rho = {fmt_rho(self.pooled)} over {len(self.points)} arrivals")
        return "\n".join(lines)


def fmt_rho(rho: float | None) -> str:
    return "undefined" if rho is None else f"{rho:.4f}"


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Pearson coefficient, or None when fewer than 3 pairs or either series is constant."""
    if len(xs) < MIN_POINTS:
        return None
    try:
        rho = statistics.correlation(xs, ys)
    except statistics.StatisticsError:
        return None
    return rho if math.isfinite(rho) else None


def correlation_report(telemetry: Sequence[TelemetryRecord], objective: str = MINSUM) -> CorrelationReport:
    """Pair cumulative planned cost with consumption at every site arrival (depot return included).

    Flight time is measured from each robot's takeoff record.
    """
    report = CorrelationReport(objective)
    launch: dict[int, float] = {}
    for r in telemetry:
        if r.event == "takeoff":
            launch.setdefault(r.robot, r.t)
        elif r.event.startswith("site_arrival:"):
            value = r.cum_energy if objective == MINSUM else r.t - launch.get(r.robot, 0.0)
            report.points.append(CorrelationPoint(r.robot, int(r.event.split(":")[1]), r.t, r.cum_cost, value))
    robots = sorted({p.robot for p in report.points})
    for k in robots:
        pts = [p for p in report.points if p.robot == k]
        report.per_robot[k] = pearson([p.cost for p in pts], [p.value for p in pts])
    report.pooled = pearson([p.cost for p in report.points], [p.value for p in report.points])
    return report


def write_correlation_csv(report: CorrelationReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["robot", "site", "t", "cum_cost", report.value_label])
        for p in report.points:
            w.writerow([p.robot, p.site, f"{p.t:.3f}", f"{p.cost:g}", f"{p.value:.6f}"])
        w.writerow([])
        w.writerow(["robot", "rho"])
        for k, rho in sorted(report.per_robot.items()):
            w.writerow([k, fmt_rho(rho)])
        w.writerow(["pooled", fmt_rho(report.pooled)])


# --- figure series -------------------------------------------------------------

def battery_series(telemetry: Sequence[TelemetryRecord]) -> list[tuple[int, float, float]]:
    """(robot, t, battery %) for every record: the battery-versus-time figure."""
    return [(r.robot, r.t, r.battery_pct) for r in telemetry]


def cumulative_series(telemetry: Sequence[TelemetryRecord], objective: str) -> list[tuple[int, int, float, float]]:
    """(robot, site, cumulative cost, cumulative energy or flight time) at arrivals."""
    rep = correlation_report(telemetry, objective)
    return [(p.robot, p.site, p.cost, p.value) for p in rep.points]


def write_figure_series(telemetry: Sequence[TelemetryRecord], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "battery_vs_time.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["robot", "t", "battery_pct"])
        for robot, t, b in battery_series(telemetry):
            w.writerow([robot, f"{t:.3f}", f"{b:.5f}"])
    written.append(path)
    for objective, name, label in ((MINSUM, "energy_vs_cost.csv", "cum_energy"),
                                   ("minmax", "flight_time_vs_cost.csv", "flight_time_s")):
        path = out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["robot", "site", "cum_cost", label])
            for robot, site, cost, value in cumulative_series(telemetry, objective):
                w.writerow([robot, site, f"{cost:g}", f"{value:.6f}"])
        written.append(path)
    return written
