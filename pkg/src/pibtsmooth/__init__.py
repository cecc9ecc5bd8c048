"""Eight-connected PiBT with safety-aware string pulling and SIPP repair."""

from .benchmark_io import (
    ParseError,
    RunRecord,
    Scenario,
    ScenarioError,
    load_map,
    load_scenario,
    parse_map,
    parse_scenario,
    write_results,
)
from .grid import Connectivity, DistanceField, GridError, GridMap, distance_field, neighbors
from .interaction import CriticalRegion, InteractionSchedule, PinnedWaypoint, build_schedule, directly_interacting
from .metrics import PlanMetrics, arclength, makespan, reduction
from .pibt import Config, DiscretePlan, PlanningError, PriorityState, move_valid, pibt_step, plan
from .pipeline import PipelineResult, RunConfig, run_pipeline
from .resolution import ConflictEvent, build_safe_intervals, detect_intersections, resolve, sipp_replan
from .smoothing import TimedPath, line_of_sight, smooth_plan, string_pull

__version__ = "0.1.0"
