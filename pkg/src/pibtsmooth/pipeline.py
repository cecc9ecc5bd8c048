"""End-to-end run: parse, plan, smooth, resolve, measure."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .benchmark_io import RunRecord, Scenario, load_map, load_scenario
from .grid import Connectivity, GridMap
from .metrics import PlanMetrics, arclength, makespan
from .pibt import DEFAULT_RADIUS, DiscretePlan, plan
from .resolution import Resolution, detect_intersections, resolve_report
from .smoothing import TimedPath, raw_paths, schedule_for, smooth_plan

SMOOTHING_MODES = ("off", "naive", "aware")


@dataclass
class RunConfig:
    map_path: Path
    scen_path: Path
    agent_count: int
    connectivity: Connectivity = Connectivity.EIGHT
    seed: int = 0
    radius: float = DEFAULT_RADIUS
    horizon: int | None = None
    smoothing: str = "aware"
    out_csv: Path | None = None
    dump_dir: Path | None = None

    def __post_init__(self) -> None:
        self.map_path = Path(self.map_path)
        self.scen_path = Path(self.scen_path)
        self.connectivity = Connectivity.parse(self.connectivity)
        if self.agent_count < 1:
            raise ValueError("agent_count must be at least 1")
        if self.smoothing not in SMOOTHING_MODES:
            raise ValueError(f"smoothing must be one of {SMOOTHING_MODES}")


@dataclass
class PipelineResult:
    plan: DiscretePlan
    raw: list[TimedPath]
    smoothed: list[TimedPath]
    final: list[TimedPath]
    metrics: PlanMetrics
    resolution: Resolution | None = None
    remaining: list = field(default_factory=list)

    @property
    def collision_free(self) -> bool:
        return not self.remaining


def run_pipeline(
    scenario: Scenario,
    gmap: GridMap,
    conn: Connectivity = Connectivity.EIGHT,
    seed: int = 0,
    smoothing: str = "aware",
    radius: float = DEFAULT_RADIUS,
    horizon: int | None = None,
) -> PipelineResult:
    conn = Connectivity.parse(conn)
    t0 = time.perf_counter()
    discrete = plan(scenario, gmap, conn, horizon=horizon, rng_seed=seed, radius=radius)
    t1 = time.perf_counter()
    raw = raw_paths(discrete)
    raw_len = [arclength(p) for p in raw]
    if not discrete.solved:
        metrics = PlanMetrics(raw_len, float(discrete.t_max), sum(raw_len), time_pibt=t1 - t0, raw_per_agent=raw_len)
        return PipelineResult(discrete, raw, raw, raw, metrics)
    schedule = schedule_for(discrete, gmap, conn, smoothing)
    smoothed = smooth_plan(discrete, gmap, conn, smoothing, schedule)
    t2 = time.perf_counter()
    report = resolve_report(smoothed, discrete, gmap, conn, radius, schedule)
    t3 = time.perf_counter()
    final = report.paths
    remaining = detect_intersections(final, radius)
    metrics = PlanMetrics(
        [arclength(p) for p in final],
        makespan(final) if final else 0.0,
        sum(raw_len),
        intersections_introduced=report.introduced,
        intersections_resolved=report.introduced - len(remaining),
        time_pibt=t1 - t0,
        time_smooth=t2 - t1,
        time_resolve=t3 - t2,
        raw_per_agent=raw_len,
    )
    return PipelineResult(discrete, raw, smoothed, final, metrics, report, remaining)


def record_for(result: PipelineResult, name: str, conn: Connectivity, seed: int, status: str) -> RunRecord:
    m = result.metrics
    return RunRecord(
        scenario_name=name,
        agent_count=result.plan.num_agents,
        connectivity=conn,
        seed=seed,
        solve_time_pibt=m.time_pibt,
        solve_time_total=m.time_total,
        arclength_raw=m.raw_arclength,
        arclength_smoothed=m.arclength_total,
        makespan=int(result.plan.t_max),
        intersections_introduced=m.intersections_introduced,
        intersections_resolved=m.intersections_resolved,
        status=status,
    )


def format_trajectories(paths: Sequence[TimedPath]) -> str:
    lines: list[str] = []
    for a, p in enumerate(paths):
        lines.append(f"agent {a}")
        lines.extend(f"{t:g} {x:g} {y:g}" for t, x, y in p.waypoints)
    return "\n".join(lines) + "\n"


def parse_trajectories(text: str) -> list[TimedPath]:
    paths: list[list[tuple[float, float, float]]] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("agent"):
            paths.append([])
            continue
        t, x, y = (float(v) for v in line.split())
        paths[-1].append((t, x, y))
    return [TimedPath(tuple(p)) for p in paths]


def load_inputs(cfg: RunConfig) -> tuple[GridMap, Scenario]:
    gmap = load_map(cfg.map_path)
    scen = load_scenario(cfg.scen_path, gmap, cfg.agent_count)
    return gmap, scen


def run_name(cfg: RunConfig) -> str:
    return cfg.scen_path.stem
