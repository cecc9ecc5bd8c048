"""Arclength, makespan and path-length reduction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .smoothing import TimedPath


def arclength(path: TimedPath) -> float:
    wp = path.waypoints
    return sum(math.hypot(b[1] - a[1], b[2] - a[2]) for a, b in zip(wp, wp[1:]))


def total_arclength(paths: Sequence[TimedPath]) -> float:
    return sum(arclength(p) for p in paths)


def reduction(raw: float, smoothed: float) -> float:
    """Percentage by which ``smoothed`` is shorter than ``raw``."""
    if raw <= 0:
        raise ValueError("raw arclength must be positive")
    return 100.0 * (raw - smoothed) / raw


def makespan(paths: Sequence[TimedPath]) -> float:
    if not paths:
        raise ValueError("makespan of an empty plan is undefined")
    return max(p.end_time for p in paths)


@dataclass
class PlanMetrics:
    arclength_per_agent: list[float]
    makespan: float
    raw_arclength: float
    intersections_introduced: int = 0
    intersections_resolved: int = 0
    time_pibt: float = 0.0
    time_smooth: float = 0.0
    time_resolve: float = 0.0
    raw_per_agent: list[float] = field(default_factory=list)

    @property
    def arclength_total(self) -> float:
        return sum(self.arclength_per_agent)

    @property
    def reduction_pct(self) -> float:
        return reduction(self.raw_arclength, self.arclength_total) if self.raw_arclength > 0 else 0.0

    @property
    def time_total(self) -> float:
        return self.time_pibt + self.time_smooth + self.time_resolve

    @property
    def overhead(self) -> float:
        total = self.time_total
        return (self.time_smooth + self.time_resolve) / total if total > 0 else 0.0
