"""String pulling that treats other agents' critical regions as timed obstacles.

Geometry: cell ``(x, y)`` is the unit square ``[x, x+1] x [y, y+1]`` and
trajectories run through cell centers ``(x + 0.5, y + 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .grid import CellCoord, Connectivity, GridMap
from .interaction import InteractionSchedule, RegionIndex, build_schedule, trivial_schedule
from .pibt import DiscretePlan

Waypoint = tuple[float, float, float]  # (t, x, y)

EPS = 1e-9
MAX_SPEED = math.sqrt(2.0)


@dataclass(frozen=True)
class TimedPath:
    waypoints: tuple[Waypoint, ...]

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise ValueError("a timed path needs at least one waypoint")
        for (t0, _, _), (t1, _, _) in zip(self.waypoints, self.waypoints[1:]):
            if not t1 > t0:
                raise ValueError(f"waypoint times must increase strictly ({t0} -> {t1})")

    @classmethod
    def from_cells(cls, cells: Sequence[CellCoord], t0: int = 0) -> "TimedPath":
        return cls(tuple((float(t0 + k), c[0] + 0.5, c[1] + 0.5) for k, c in enumerate(cells)))

    def __len__(self) -> int:
        return len(self.waypoints)

    @property
    def start_time(self) -> float:
        return self.waypoints[0][0]

    @property
    def end_time(self) -> float:
        return self.waypoints[-1][0]

    def times(self) -> np.ndarray:
        return np.array([w[0] for w in self.waypoints])

    def position(self, t: float) -> tuple[float, float]:
        """Position at time ``t``; clamped to the end points outside the span."""
        wp = self.waypoints
        if t <= wp[0][0]:
            return wp[0][1], wp[0][2]
        if t >= wp[-1][0]:
            return wp[-1][1], wp[-1][2]
        lo, hi = 0, len(wp) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if wp[mid][0] <= t:
                lo = mid
            else:
                hi = mid
        (ta, xa, ya), (tb, xb, yb) = wp[lo], wp[hi]
        s = (t - ta) / (tb - ta)
        return xa + s * (xb - xa), ya + s * (yb - ya)

    def sample(self, times: np.ndarray) -> np.ndarray:
        t = self.times()
        xs = np.interp(times, t, [w[1] for w in self.waypoints])
        ys = np.interp(times, t, [w[2] for w in self.waypoints])
        return np.stack([xs, ys], axis=-1)

    def max_speed(self) -> float:
        best = 0.0
        for (t0, x0, y0), (t1, x1, y1) in zip(self.waypoints, self.waypoints[1:]):
            best = max(best, math.hypot(x1 - x0, y1 - y0) / (t1 - t0))
        return best


def _blocked_bytes(gmap: GridMap) -> bytes:
    cached = gmap._cache.get("blocked_bytes")
    if cached is None:
        cached = gmap.blocked.astype(np.uint8).tobytes()
        gmap._cache["blocked_bytes"] = cached
    return cached


def supercover(ax: float, ay: float, bx: float, by: float) -> list[CellCoord]:
    """Every cell whose closed square touches the segment (corner contact included)."""
    out: list[CellCoord] = []
    _walk(ax, ay, bx, by, lambda c, r: out.append((c, r)) or False)
    return sorted(set(out))


def _walk(ax: float, ay: float, bx: float, by: float, visit) -> bool:
    """Call ``visit(col, row)`` over the supercover; stop early if it returns True."""
    if ax > bx:
        ax, ay, bx, by = bx, by, ax, ay
    dx, dy = bx - ax, by - ay
    c_lo = math.ceil(ax - EPS) - 1
    c_hi = math.floor(bx + EPS)
    for c in range(c_lo, c_hi + 1):
        if dx > 0:
            xl, xr = max(float(c), ax), min(float(c + 1), bx)
            if xl > xr:
                xl = xr = min(max(float(c), ax), bx)
            y1 = ay + (xl - ax) * dy / dx
            y2 = ay + (xr - ax) * dy / dx
            ylo, yhi = (y1, y2) if y1 <= y2 else (y2, y1)
        else:
            ylo, yhi = (ay, by) if ay <= by else (by, ay)
        for r in range(math.ceil(ylo - EPS) - 1, math.floor(yhi + EPS) + 1):
            if visit(c, r):
                return True
    return False


def _blocked_prefix(gmap: GridMap) -> list[list[int]]:
    """Summed-area table of blocked cells, padded by one row and column."""
    cached = gmap._cache.get("blocked_prefix")
    if cached is None:
        sat = np.zeros((gmap.height + 1, gmap.width + 1), dtype=np.int64)
        sat[1:, 1:] = gmap.blocked.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
        cached = sat.tolist()
        gmap._cache["blocked_prefix"] = cached
    return cached


def _cell_range(a0: float, b0: float) -> tuple[int, int]:
    return math.ceil(min(a0, b0) - EPS) - 1, math.floor(max(a0, b0) + EPS)


def static_clear(gmap: GridMap, a: tuple[float, float], b: tuple[float, float]) -> bool:
    """No blocked or off-map cell touches the segment a-b (closed squares)."""
    w, h = gmap.width, gmap.height
    sat = _blocked_prefix(gmap)
    blocked = _blocked_bytes(gmap)

    def hit(c: int, r: int) -> bool:
        return not (0 <= c < w and 0 <= r < h) or blocked[r * w + c] == 1

    # bisect until each piece's cell bounding box is obstacle free (accept) or
    # the piece is short enough to walk cell by cell
    stack = [(a[0], a[1], b[0], b[1])]
    while stack:
        ax, ay, bx, by = stack.pop()
        c_lo, c_hi = _cell_range(ax, bx)
        r_lo, r_hi = _cell_range(ay, by)
        if 0 <= c_lo and c_hi < w and 0 <= r_lo and r_hi < h:
            if sat[r_hi + 1][c_hi + 1] - sat[r_lo][c_hi + 1] - sat[r_hi + 1][c_lo] + sat[r_lo][c_lo] == 0:
                continue
            if (c_hi - c_lo) + (r_hi - r_lo) > 6:
                mx, my = 0.5 * (ax + bx), 0.5 * (ay + by)
                stack.append((mx, my, bx, by))
                stack.append((ax, ay, mx, my))
                continue
        if _walk(ax, ay, bx, by, hit):
            return False
    return True


def regions_clear(
    index: RegionIndex, a: Waypoint, b: Waypoint, agent: int | None
) -> bool:
    """True if the constant-speed motion a->b stays out of every other agent's
    region during that region's window (closed intervals throughout)."""
    return bool(regions_clear_many(index, a, np.array([b], dtype=float), agent)[0])


def regions_clear_many(
    index: RegionIndex, a: Waypoint, bs: np.ndarray, agent: int | None
) -> np.ndarray:
    """``regions_clear`` for one start and many ends (rows of ``bs`` = t, x, y)."""
    out = np.ones(len(bs), dtype=bool)
    if len(index) == 0 or len(bs) == 0:
        return out
    ta, ax, ay = a
    sl = index.window_slice(ta, float(bs[:, 0].max()))
    if sl.stop <= sl.start:
        return out
    # only other agents' regions overlapping the bounding box of all the motions
    x_lo, x_hi = min(ax, float(bs[:, 1].min())), max(ax, float(bs[:, 1].max()))
    y_lo, y_hi = min(ay, float(bs[:, 2].min())), max(ay, float(bs[:, 2].max()))
    keep = (
        (index.x0[sl] <= x_hi + EPS)
        & (index.x1[sl] >= x_lo - EPS)
        & (index.y0[sl] <= y_hi + EPS)
        & (index.y1[sl] >= y_lo - EPS)
    )
    if agent is not None:
        keep &= index.agent[sl] != agent
    t0, t1 = index.t0[sl][keep], index.t1[sl][keep]
    x0, x1, y0, y1 = index.x0[sl][keep], index.x1[sl][keep], index.y0[sl][keep], index.y1[sl][keep]
    if len(t0) == 0:
        return out
    tb = bs[:, 0:1]
    lo = np.maximum(t0[None, :], ta)
    hi = np.minimum(t1[None, :], tb)
    dt = tb - ta
    for p0, p1, q0, q1 in ((ax, bs[:, 1:2], x0[None, :], x1[None, :]), (ay, bs[:, 2:3], y0[None, :], y1[None, :])):
        v = (p1 - p0) / dt
        still = v == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            s1 = ta + (q0 - p0) / v
            s2 = ta + (q1 - p0) / v
        inside = (q0 - EPS <= p0) & (p0 <= q1 + EPS)
        lo = np.where(still, lo, np.maximum(lo, np.minimum(s1, s2)))
        hi = np.where(still, np.where(inside, hi, -np.inf), np.minimum(hi, np.maximum(s1, s2)))
    hit = (lo <= hi + EPS).any(axis=1)
    return ~hit


def line_of_sight(
    a: Waypoint,
    b: Waypoint,
    gmap: GridMap,
    schedule: InteractionSchedule | None,
    agent: int | None,
) -> bool:
    if not b[0] > a[0]:
        raise ValueError("line_of_sight needs b.t > a.t")
    if not static_clear(gmap, (a[1], a[2]), (b[1], b[2])):
        return False
    if schedule is None:
        return True
    return regions_clear(schedule.index, a, b, agent)


def string_pull(
    segment: Sequence[Waypoint],
    gmap: GridMap,
    schedule: InteractionSchedule | None,
    agent: int | None,
) -> list[Waypoint]:
    """Greedy pulling: from each anchor keep the last index before the first
    failed line-of-sight test.  The immediate successor is always kept, so the
    worst case is the input itself."""
    seg = list(segment)
    n = len(seg)
    if n <= 2:
        return seg
    arr = np.array(seg, dtype=float)
    index = schedule.index if schedule is not None else None
    out = [seg[0]]
    i = 0
    while i < n - 1:
        nxt = i + 1
        j = i + 2
        chunk = 8
        while j < n:
            stop = min(n, j + chunk)
            ok = _visible(arr, seg, i, j, stop, gmap, index, agent)
            bad = np.flatnonzero(~ok)
            if len(bad):
                nxt = j + int(bad[0]) - 1
                break
            nxt = stop - 1
            j = stop
            chunk *= 2
        out.append(seg[nxt])
        i = nxt
    return out


def _visible(
    arr: np.ndarray,
    seg: list[Waypoint],
    i: int,
    j: int,
    stop: int,
    gmap: GridMap,
    index: RegionIndex | None,
    agent: int | None,
) -> np.ndarray:
    """line_of_sight(seg[i], seg[k]) for k in [j, stop); entries after the
    first failure are unspecified."""
    ok = np.ones(stop - j, dtype=bool)
    if index is not None:
        ok &= regions_clear_many(index, seg[i], arr[j:stop], agent)
    a = (seg[i][1], seg[i][2])
    for q in range(stop - j):
        if not ok[q]:
            break
        w = seg[j + q]
        if not static_clear(gmap, a, (w[1], w[2])):
            ok[q] = False
            break
    return ok


def raw_paths(plan: DiscretePlan) -> list[TimedPath]:
    return [TimedPath.from_cells(plan.path(a)) for a in range(plan.num_agents)]


def final_arrival(plan: DiscretePlan, agent: int) -> int:
    """First timestep from which the agent stays on its last cell."""
    path = plan.path(agent)
    t = len(path) - 1
    while t > 0 and path[t - 1] == path[-1]:
        t -= 1
    return t


def split_times(plan: DiscretePlan, schedule: InteractionSchedule, agent: int) -> list[int]:
    """Pinned times plus the final arrival, where the idle tail begins.

    Pulling across the idle tail would spread the last approach over the
    remaining plan length without shortening it.
    """
    return sorted(set(schedule.pin_times(agent)) | {final_arrival(plan, agent)})


def smooth_agent(
    plan: DiscretePlan, agent: int, gmap: GridMap, schedule: InteractionSchedule, use_regions: bool = True
) -> TimedPath:
    raw = TimedPath.from_cells(plan.path(agent)).waypoints
    pins = split_times(plan, schedule, agent)
    sched = schedule if use_regions else None
    out: list[Waypoint] = [raw[pins[0]]]
    for t0, t1 in zip(pins, pins[1:]):
        out.extend(string_pull(raw[t0 : t1 + 1], gmap, sched, agent)[1:])
    return TimedPath(tuple(out))


def smooth_plan(
    plan: DiscretePlan,
    gmap: GridMap,
    conn: Connectivity,
    mode: str = "aware",
    schedule: InteractionSchedule | None = None,
) -> list[TimedPath]:
    """Smooth every agent's path.

    ``mode`` is ``"aware"`` (pins and critical regions), ``"naive"`` (plain
    string pulling between start and goal, static obstacles only) or
    ``"off"`` (raw cell-center paths).
    """
    if mode == "off":
        return raw_paths(plan)
    if schedule is None:
        schedule = schedule_for(plan, gmap, conn, mode)
    use_regions = mode == "aware"
    return [smooth_agent(plan, a, gmap, schedule, use_regions) for a in range(plan.num_agents)]


def schedule_for(plan: DiscretePlan, gmap: GridMap, conn: Connectivity, mode: str) -> InteractionSchedule:
    if mode == "aware":
        return build_schedule(plan, conn, gmap)
    if mode in ("naive", "off"):
        return trivial_schedule(plan, gmap)
    raise ValueError(f"unknown smoothing mode {mode!r}")


def path_cells(path: TimedPath) -> Iterable[CellCoord]:
    for _, x, y in path.waypoints:
        yield int(math.floor(x)), int(math.floor(y))
