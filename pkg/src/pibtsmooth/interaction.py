"""Pinned waypoints and time-bounded critical regions derived from a plan."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .grid import CellCoord, Connectivity, GridMap
from .pibt import DiscretePlan

INTERACTION_HOPS = 2


@dataclass(frozen=True)
class PinnedWaypoint:
    t: int
    cell: CellCoord


@dataclass(frozen=True)
class CriticalRegion:
    """Moore neighborhood of ``agent``'s cell, an obstacle for others during ``window``.

    The cells always form an axis-aligned block, stored as inclusive cell
    bounds; ``cells`` enumerates them.
    """

    agent: int
    window: tuple[float, float]
    x_lo: int
    x_hi: int
    y_lo: int
    y_hi: int

    @property
    def cells(self) -> frozenset[CellCoord]:
        return frozenset(
            (x, y) for x in range(self.x_lo, self.x_hi + 1) for y in range(self.y_lo, self.y_hi + 1)
        )


@dataclass
class InteractionSchedule:
    pinned: list[list[PinnedWaypoint]]
    regions: list[CriticalRegion]
    width: int = 0
    height: int = 0
    _index: "RegionIndex | None" = field(default=None, repr=False)

    def pin_times(self, agent: int) -> list[int]:
        return [p.t for p in self.pinned[agent]]

    @property
    def index(self) -> "RegionIndex":
        if self._index is None:
            self._index = RegionIndex(self.regions)
        return self._index


class RegionIndex:
    """Regions sorted by window start, as flat arrays for vectorised queries."""

    def __init__(self, regions: list[CriticalRegion]):
        regions = sorted(regions, key=lambda r: (r.window[0], r.agent))
        self.t0 = np.array([r.window[0] for r in regions], dtype=float)
        self.t1 = np.array([r.window[1] for r in regions], dtype=float)
        self.agent = np.array([r.agent for r in regions], dtype=np.int64)
        # closed rectangles in continuous coordinates
        self.x0 = np.array([r.x_lo for r in regions], dtype=float)
        self.x1 = np.array([r.x_hi + 1 for r in regions], dtype=float)
        self.y0 = np.array([r.y_lo for r in regions], dtype=float)
        self.y1 = np.array([r.y_hi + 1 for r in regions], dtype=float)
        self.max_len = float((self.t1 - self.t0).max()) if regions else 0.0

    def __len__(self) -> int:
        return len(self.t0)

    def window_slice(self, ta: float, tb: float) -> slice:
        """Indices of regions whose window may meet [ta, tb]."""
        lo = int(np.searchsorted(self.t0, ta - self.max_len, side="left"))
        hi = int(np.searchsorted(self.t0, tb, side="right"))
        return slice(lo, hi)


def hop_distance(a: CellCoord, b: CellCoord, conn: Connectivity) -> int:
    return conn.hops(a, b)


def directly_interacting(
    config: tuple[CellCoord, ...] | list[CellCoord], i: int, j: int, conn: Connectivity
) -> bool:
    if i == j:
        raise ValueError("an agent does not interact with itself")
    return hop_distance(config[i], config[j], conn) <= INTERACTION_HOPS


def moore_block(cell: CellCoord, width: int, height: int) -> tuple[int, int, int, int]:
    x, y = cell
    return max(x - 1, 0), min(x + 1, width - 1), max(y - 1, 0), min(y + 1, height - 1)


def interacting_pairs(positions: np.ndarray, conn: Connectivity, hops: int = INTERACTION_HOPS) -> set[tuple[int, int]]:
    """Pairs (i < j) within ``hops`` under the connectivity's move metric."""
    if len(positions) < 2:
        return set()
    p = np.inf if conn is Connectivity.EIGHT else 1
    tree = cKDTree(positions)
    return tree.query_pairs(hops + 1e-9, p=p)


def build_schedule(
    plan: DiscretePlan,
    conn: Connectivity,
    gmap: GridMap,
    hops: int = INTERACTION_HOPS,
) -> InteractionSchedule:
    conn = Connectivity.parse(conn)
    width, height = gmap.width, gmap.height
    n, t_max = plan.num_agents, plan.t_max
    pos = plan.positions()
    pinned_t: list[set[int]] = [{0, t_max} for _ in range(n)]
    regions: list[CriticalRegion] = []
    for t in range(t_max + 1):
        active: set[int] = set()
        for i, j in interacting_pairs(pos[t], conn, hops):
            active.add(i)
            active.add(j)
        for a in sorted(active):
            pinned_t[a].add(t)
            cell = (int(pos[t, a, 0]), int(pos[t, a, 1]))
            regions.append(CriticalRegion(a, (float(t), float(t + 1)), *moore_block(cell, width, height)))
    pinned = [
        [PinnedWaypoint(t, (int(pos[t, a, 0]), int(pos[t, a, 1]))) for t in sorted(ts)]
        for a, ts in enumerate(pinned_t)
    ]
    return InteractionSchedule(pinned, regions, width, height)


def trivial_schedule(plan: DiscretePlan, gmap: GridMap) -> InteractionSchedule:
    """Only start and final waypoints pinned, no regions (plain string pulling)."""
    t_max = plan.t_max
    pinned = [
        [PinnedWaypoint(t, plan.configs[t][a]) for t in sorted({0, t_max})]
        for a in range(plan.num_agents)
    ]
    return InteractionSchedule(pinned, [], gmap.width, gmap.height)
