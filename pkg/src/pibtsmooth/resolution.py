"""Residual-collision detection and SIPP-based repair of smoothed trajectories."""

from __future__ import annotations

import heapq
from bisect import bisect_left, bisect_right
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .grid import CellCoord, Connectivity, GridMap
from .interaction import InteractionSchedule, PinnedWaypoint
from .pibt import DEFAULT_RADIUS, DiscretePlan
from .smoothing import TimedPath, Waypoint, split_times

# separations within this much (squared) of the contact distance count as touching
SEP_TOL = 1e-9
MAX_SIPP_EXPANSIONS = 200_000
SIPP_MARGIN = 3
MAX_REPLANS_PER_SEGMENT = 3


class ResolutionError(RuntimeError):
    """A conflict remains between two segments that were both reverted."""


@dataclass(frozen=True)
class ConflictEvent:
    agents: tuple[int, int]
    time: float
    separation: float
    window: tuple[float, float]


def _timeline(paths: Sequence[TimedPath]) -> np.ndarray:
    times = np.unique(np.concatenate([p.times() for p in paths]))
    return times


def _sample_all(paths: Sequence[TimedPath], times: np.ndarray) -> np.ndarray:
    return np.stack([p.sample(times) for p in paths]) if paths else np.zeros((0, len(times), 2))


def linear_min_sep2(d0: np.ndarray, d1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimum squared norm of d0 + s (d1 - d0) over s in [0, 1], and its argmin.

    Works row-wise on arrays of shape (m, 2).
    """
    e = d1 - d0
    ee = np.einsum("ij,ij->i", e, e)
    de = np.einsum("ij,ij->i", d0, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(ee > 0, -de / np.where(ee > 0, ee, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    d = d0 + s[:, None] * e
    return np.einsum("ij,ij->i", d, d), s


def _events_from_hits(hits: list[tuple[int, int, int, float, float]], times: np.ndarray) -> list[ConflictEvent]:
    hits.sort()
    events: list[ConflictEvent] = []
    for (i, j), group in itertools.groupby(hits, key=lambda h: (h[0], h[1])):
        run: list[tuple[int, int, int, float, float]] = []
        for h in group:
            if run and h[2] != run[-1][2] + 1:
                events.append(_merge(run, times))
                run = []
            run.append(h)
        if run:
            events.append(_merge(run, times))
    events.sort(key=lambda e: (e.time, e.agents))
    return events


def _merge(run, times: np.ndarray) -> ConflictEvent:
    best = min(run, key=lambda h: h[3])
    i, j, k, d2, s = best
    t = float(times[k] + s * (times[k + 1] - times[k]))
    return ConflictEvent(
        (i, j), t, math.sqrt(max(d2, 0.0)), (float(times[run[0][2]]), float(times[run[-1][2] + 1]))
    )


def _detect_on_grid(
    pos: np.ndarray, times: np.ndarray, radius: float, subset: Sequence[int] | None = None
) -> list[ConflictEvent]:
    """Exact detection for trajectories that are linear between consecutive ``times``."""
    n = pos.shape[0]
    if n < 2 or len(times) < 2:
        return []
    thr = (2.0 * radius) ** 2 - SEP_TOL
    contact = 2.0 * radius
    hits: list[tuple[int, int, int, float, float]] = []
    if subset is not None:
        # few agents changed: test them against everyone over all pieces at once
        seen: set[int] = set()
        for a in sorted(set(subset)):
            others = np.array([o for o in range(n) if o != a and o not in seen], dtype=np.int64)
            seen.add(a)
            if len(others) == 0:
                continue
            d = pos[others] - pos[a]
            m, steps = len(others), len(times) - 1
            d2, s = linear_min_sep2(d[:, :-1].reshape(-1, 2), d[:, 1:].reshape(-1, 2))
            for q in np.nonzero(d2 < thr)[0]:
                o, k = others[q // steps], q % steps
                i, j = (a, int(o)) if a < o else (int(o), a)
                hits.append((i, j, int(k), float(d2[q]), float(s[q])))
        return _events_from_hits(hits, times)
    for k in range(len(times) - 1):
        a, b = pos[:, k], pos[:, k + 1]
        disp = np.sqrt(((b - a) ** 2).sum(axis=1))
        reach = contact + 2.0 * float(disp.max()) + 1e-6
        pairs = cKDTree(a).query_pairs(reach, output_type="ndarray")
        if len(pairs) == 0:
            continue
        I, J = pairs[:, 0], pairs[:, 1]
        d2, s = linear_min_sep2(a[J] - a[I], b[J] - b[I])
        for m in np.nonzero(d2 < thr)[0]:
            hits.append((int(I[m]), int(J[m]), k, float(d2[m]), float(s[m])))
    return _events_from_hits(hits, times)


def detect_intersections(
    paths: Sequence[TimedPath], radius: float = DEFAULT_RADIUS, agents: Sequence[int] | None = None
) -> list[ConflictEvent]:
    """All pairs whose discs (of ``radius``) overlap at some time.

    Consecutive overlapping pieces of the same pair are reported as one event
    located at the minimum separation.  ``agents`` restricts the search to
    pairs involving at least one of the listed agents.
    """
    if len(paths) < 2:
        return []
    times = _timeline(paths)
    return _detect_on_grid(_sample_all(paths, times), times, radius, agents)


def _blocked_on_piece(
    p0: np.ndarray, p1: np.ndarray, ta: np.ndarray, tb: np.ndarray, c: np.ndarray, reach2: float
) -> tuple[np.ndarray, np.ndarray]:
    """Open time intervals during which linear pieces are within sqrt(reach2) of ``c``.

    Returns (lo, hi) arrays; rows with lo >= hi are empty.  Intervals cut by a
    piece boundary are nudged outward so abutting pieces merge.
    """
    dt = tb - ta
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(dt[:, None] > 0, (p1 - p0) / np.where(dt > 0, dt, 1.0)[:, None], 0.0)
    w = p0 - c
    qa = (v * v).sum(axis=1)
    qb = 2.0 * (w * v).sum(axis=1)
    qc = (w * w).sum(axis=1) - reach2
    lo = np.full(len(ta), np.inf)
    hi = np.full(len(ta), -np.inf)
    still = qa <= 0
    inside = still & (qc < 0)
    lo[inside], hi[inside] = -np.inf, np.inf
    moving = ~still
    disc = qb * qb - 4 * qa * qc
    ok = moving & (disc > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = (-qb - sq) / (2 * qa)
        r2 = (-qb + sq) / (2 * qa)
    lo = np.where(ok, r1, lo)
    hi = np.where(ok, r2, hi)
    # back to absolute time, clip to the piece
    lo_abs = ta + lo
    hi_abs = ta + hi
    cut_lo = lo_abs < ta
    cut_hi = hi_abs > tb
    lo_abs = np.where(cut_lo, ta - 1e-9, lo_abs)
    hi_abs = np.where(cut_hi, tb + 1e-9, hi_abs)
    return lo_abs, hi_abs


def _merge_open(lo: np.ndarray, hi: np.ndarray) -> list[tuple[float, float]]:
    keep = lo < hi
    lo, hi = lo[keep], hi[keep]
    order = np.argsort(lo, kind="stable")
    merged: list[list[float]] = []
    for a, b in zip(lo[order], hi[order]):
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([float(a), float(b)])
    return [(a, b) for a, b in merged]


def _complement(blocked: list[tuple[float, float]], t_start: float, t_end: float) -> list[tuple[float, float]]:
    """Closed safe intervals inside [t_start, t_end] around open blocked ones."""
    safe: list[tuple[float, float]] = []
    cursor = t_start
    for a, b in blocked:
        if b <= t_start:
            continue
        if a >= t_end:
            break
        if a >= cursor:
            safe.append((cursor, a))
        cursor = max(cursor, b)
    if cursor <= t_end:
        safe.append((cursor, t_end))
    return [(a, b) for a, b in safe if a <= b]


def build_safe_intervals(
    cell: CellCoord, fixed: Sequence[TimedPath], radius: float = DEFAULT_RADIUS, horizon: float | None = None
) -> list[tuple[float, float]]:
    """Closed time intervals in [0, horizon] when a disc at ``cell``'s center
    touches no fixed trajectory.  Agents rest at their end points outside
    their own time span."""
    if horizon is None:
        horizon = max((p.end_time for p in fixed), default=0.0)
    c = np.array([cell[0] + 0.5, cell[1] + 0.5])
    reach2 = (2.0 * radius) ** 2 - SEP_TOL
    los, his = [], []
    for p in fixed:
        wp = np.array(p.waypoints, dtype=float)
        t = np.concatenate([[-np.inf], wp[:, 0], [np.inf]])
        xy = np.concatenate([wp[:1, 1:], wp[:, 1:], wp[-1:, 1:]])
        ta, tb = t[:-1].copy(), t[1:].copy()
        p0, p1 = xy[:-1], xy[1:]
        # the unbounded rest pieces are stationary; give them finite extents
        ta[0] = min(-1.0, wp[0, 0] - 1.0)
        tb[-1] = max(horizon + 1.0, wp[-1, 0] + 1.0)
        lo, hi = _blocked_on_piece(p0, p1, ta, tb, c, reach2)
        los.append(lo)
        his.append(hi)
    if not los:
        return [(0.0, float(horizon))]
    blocked = _merge_open(np.concatenate(los), np.concatenate(his))
    return _complement(blocked, 0.0, float(horizon))


def arclength_of(waypoints: Sequence[Waypoint]) -> float:
    return sum(math.hypot(b[1] - a[1], b[2] - a[2]) for a, b in zip(waypoints, waypoints[1:]))


def _seg_point_dist2(p0: np.ndarray, p1: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Squared distance from points ``c`` to segments p0-p1, row-wise."""
    e = p1 - p0
    w = c - p0
    ee = (e * e).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(ee > 0, (w * e).sum(axis=1) / np.where(ee > 0, ee, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    d = w - s[:, None] * e
    return (d * d).sum(axis=1)


def _cells_near(
    p0: np.ndarray, p1: np.ndarray, reach: float, box: tuple[int, int, int, int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(piece, cx, cy) for every box cell whose center lies in a piece's
    bounding box grown by ``reach``."""
    x_lo, x_hi, y_lo, y_hi = box
    lo = np.ceil(np.minimum(p0, p1) - reach - 0.5).astype(np.int64)
    hi = np.floor(np.maximum(p0, p1) + reach - 0.5).astype(np.int64)
    lo[:, 0] = np.maximum(lo[:, 0], x_lo)
    lo[:, 1] = np.maximum(lo[:, 1], y_lo)
    hi[:, 0] = np.minimum(hi[:, 0], x_hi)
    hi[:, 1] = np.minimum(hi[:, 1], y_hi)
    span = int(max(0, (hi - lo).max(initial=0))) + 1
    off = np.arange(span)
    cx = lo[:, 0, None, None] + off[None, :, None]
    cy = lo[:, 1, None, None] + off[None, None, :]
    ok = (cx <= hi[:, 0, None, None]) & (cy <= hi[:, 1, None, None])
    piece = np.broadcast_to(np.arange(len(p0))[:, None, None], ok.shape)
    cx = np.broadcast_to(cx, ok.shape)
    cy = np.broadcast_to(cy, ok.shape)
    return piece[ok], cx[ok], cy[ok]


class _FixedWindow:
    """Clearance tables for SIPP at integer times over [t0, t1] inside a box.

    Moves and waits start at integer times, so a cell's safe intervals reduce
    to runs of integer times joined by clear unit waits.  ``pos`` holds the
    other agents' positions at those times, shape (m, t1 - t0 + 1, 2).
    """

    def __init__(self, pos: np.ndarray, t0: int, t1: int, radius: float, box: tuple[int, int, int, int]):
        self.pos = pos
        self.t0, self.t1 = t0, t1
        self.box = box
        self.reach2 = (2.0 * radius) ** 2 - SEP_TOL
        reach = 2.0 * radius
        x_lo, x_hi, y_lo, y_hi = box
        bw, bh = x_hi - x_lo + 1, y_hi - y_lo + 1
        steps = t1 - t0
        self.vertex_clear = np.ones((steps + 1, bh, bw), dtype=bool)
        self.wait_clear = np.ones((max(steps, 0), bh, bw), dtype=bool)
        # a move between neighbours stays within sqrt(2)/2 of one of its end cells
        self.maybe = np.zeros((max(steps, 0), bh, bw), dtype=bool)
        self._safe: dict[CellCoord, list[tuple[int, int]]] = {}
        self._edge: dict[tuple[CellCoord, CellCoord, int], bool] = {}
        m = len(pos)
        if m == 0:
            return
        pts = pos.reshape(-1, 2)
        k_of = np.tile(np.arange(steps + 1), m)
        pc, cx, cy = _cells_near(pts, pts, reach, box)
        centers = np.stack([cx + 0.5, cy + 0.5], axis=1)
        d2 = ((pts[pc] - centers) ** 2).sum(axis=1)
        hit = d2 < self.reach2
        self.vertex_clear[k_of[pc[hit]], cy[hit] - y_lo, cx[hit] - x_lo] = False
        if steps == 0:
            return
        p0 = pos[:, :-1].reshape(-1, 2)
        p1 = pos[:, 1:].reshape(-1, 2)
        k_of = np.tile(np.arange(steps), m)
        pc, cx, cy = _cells_near(p0, p1, reach, box)
        centers = np.stack([cx + 0.5, cy + 0.5], axis=1)
        hit = _seg_point_dist2(p0[pc], p1[pc], centers) < self.reach2
        self.wait_clear[k_of[pc[hit]], cy[hit] - y_lo, cx[hit] - x_lo] = False
        pc, cx, cy = _cells_near(p0, p1, reach + math.sqrt(0.5) + 1e-6, box)
        self.maybe[k_of[pc], cy - y_lo, cx - x_lo] = True
        keys = (k_of[pc] * bh + (cy - y_lo)) * bw + (cx - x_lo)
        order = np.argsort(keys, kind="stable")
        self._near_keys = keys[order].tolist()
        self._near_piece = pc[order].tolist()
        self._p0 = p0.tolist()
        self._p1 = p1.tolist()
        self._bw, self._bh = bw, bh

    def in_box(self, cell: CellCoord) -> bool:
        x_lo, x_hi, y_lo, y_hi = self.box
        return x_lo <= cell[0] <= x_hi and y_lo <= cell[1] <= y_hi

    def safe(self, cell: CellCoord) -> list[tuple[int, int]]:
        out = self._safe.get(cell)
        if out is None:
            if not self.in_box(cell):
                out = []
            else:
                cx, cy = cell[0] - self.box[0], cell[1] - self.box[2]
                v = self.vertex_clear[:, cy, cx]
                link = self.wait_clear[:, cy, cx]
                joined_prev = np.concatenate([[False], link])
                joined_next = np.concatenate([link, [False]])
                starts = np.flatnonzero(v & ~joined_prev)
                ends = np.flatnonzero(v & ~joined_next)
                out = [(self.t0 + int(a), self.t0 + int(b)) for a, b in zip(starts, ends)]
            self._safe[cell] = out
        return out

    def edge_clear(self, a: CellCoord, b: CellCoord, t: int) -> bool:
        """Moving a -> b during [t, t + 1] keeps clear of every fixed agent."""
        if len(self.pos) == 0:
            return True
        k = t - self.t0
        x_lo, y_lo = self.box[0], self.box[2]
        if not (self.maybe[k, a[1] - y_lo, a[0] - x_lo] or self.maybe[k, b[1] - y_lo, b[0] - x_lo]):
            return True
        key = (a, b, t)
        out = self._edge.get(key)
        if out is None:
            out = True
            ax, ay, bx, by = a[0] + 0.5, a[1] + 0.5, b[0] + 0.5, b[1] + 0.5
            keys, pieces = self._near_keys, self._near_piece
            seen = set()
            for c in (a, b):
                kk = (k * self._bh + c[1] - y_lo) * self._bw + c[0] - x_lo
                for q in range(bisect_left(keys, kk), bisect_right(keys, kk)):
                    pc = pieces[q]
                    if pc in seen:
                        continue
                    seen.add(pc)
                    (fx0, fy0), (fx1, fy1) = self._p0[pc], self._p1[pc]
                    if _min_sep2(fx0 - ax, fy0 - ay, fx1 - bx, fy1 - by) < self.reach2:
                        out = False
                        break
                if not out:
                    break
            self._edge[key] = out
        return out


def _min_sep2(d0x: float, d0y: float, d1x: float, d1y: float) -> float:
    """Scalar form of linear_min_sep2."""
    ex, ey = d1x - d0x, d1y - d0y
    ee = ex * ex + ey * ey
    s = 0.0
    if ee > 0:
        s = min(1.0, max(0.0, -(d0x * ex + d0y * ey) / ee))
    dx, dy = d0x + s * ex, d0y + s * ey
    return dx * dx + dy * dy


def sipp_replan(
    agent: int,
    segment_bounds: tuple[PinnedWaypoint, PinnedWaypoint],
    gmap: GridMap,
    fixed: Sequence[TimedPath] | np.ndarray,
    conn: Connectivity,
    radius: float = DEFAULT_RADIUS,
    box: tuple[int, int, int, int] | None = None,
    corner_cutting: bool = False,
    corridor: np.ndarray | None = None,
) -> TimedPath | None:
    """Safe-interval search from the first pin to the second, arriving exactly
    at the second pin's time.  Every move and wait lasts whole timesteps.

    ``fixed`` is either a list of other agents' trajectories or an array of
    their positions at the integer times ``start.t..goal.t`` (shape
    (m, goal.t - start.t + 1, 2)).
    ``box`` optionally limits the search to cells ``(x_lo, x_hi, y_lo, y_hi)``;
    ``corridor`` (bool, shape (y_hi - y_lo + 1, x_hi - x_lo + 1)) narrows it
    further to the marked cells.
    Returns None if no interval-respecting path meets the deadline.
    """
    conn = Connectivity.parse(conn)
    start, goal = segment_bounds
    t0, t1 = int(start.t), int(goal.t)
    if t1 < t0:
        raise ValueError("segment ends before it starts")
    if isinstance(fixed, np.ndarray):
        pos = fixed
        if pos.shape[1] != t1 - t0 + 1:
            raise ValueError("fixed positions must cover exactly the segment's timesteps")
    else:
        times = np.arange(t0, t1 + 1, dtype=float)
        pos = _sample_all(list(fixed), times)
    if box is None:
        box = (0, gmap.width - 1, 0, gmap.height - 1)
    window = _FixedWindow(pos, t0, t1, radius, box)
    table = gmap.neighbor_table(conn, corner_cutting)
    width = gmap.width

    gx, gy = goal.cell
    chebyshev = conn is Connectivity.EIGHT

    def h(x: int, y: int) -> int:
        dx, dy = abs(x - gx), abs(y - gy)
        return (dx if dx > dy else dy) if chebyshev else dx + dy

    safe, edge_clear = window.safe, window.edge_clear
    x_lo, x_hi, y_lo, y_hi = box
    allowed = None if corridor is None else corridor.tolist()
    s_int = [iv for iv in safe(start.cell) if iv[0] <= t0 <= iv[1]]
    if not s_int:
        return None
    root = (start.cell, safe(start.cell).index(s_int[0]))
    if t0 + h(*start.cell) > t1:
        return None
    counter = itertools.count()
    best: dict[tuple[CellCoord, int], int] = {root: t0}
    # state -> (previous state, arrival there, departure from there)
    parent: dict[tuple[CellCoord, int], tuple[tuple[CellCoord, int], int, int] | None] = {root: None}
    # ties on f go to the state closer to the goal in a straight line
    heap = [(t0 + h(*start.cell), 0.0, next(counter), t0, root)]
    expansions = 0
    while heap:
        _, _, _, g, state = heapq.heappop(heap)
        if best.get(state, math.inf) < g:
            continue
        cell, ii = state
        ilo, ihi = safe(cell)[ii]
        if cell == goal.cell and ilo <= t1 <= ihi:
            return _reconstruct(state, g, parent, t1)
        expansions += 1
        if expansions > MAX_SIPP_EXPANSIONS:
            return None
        for nbi in table[cell[1] * width + cell[0]]:
            nx, ny = nbi % width, nbi // width
            if not (x_lo <= nx <= x_hi and y_lo <= ny <= y_hi):
                continue
            if allowed is not None and not allowed[ny - y_lo][nx - x_lo]:
                continue
            nb = (nx, ny)
            hn = h(nx, ny)
            latest = t1 - 1 - hn
            for jj, (jlo, jhi) in enumerate(safe(nb)):
                if jhi < g + 1:
                    continue
                if jlo > ihi + 1:
                    break
                d_last = min(ihi, jhi - 1, latest)
                for d in range(max(g, jlo - 1), d_last + 1):
                    if not edge_clear(cell, nb, d):
                        continue
                    key = (nb, jj)
                    arr = d + 1
                    if arr < best.get(key, math.inf):
                        best[key] = arr
                        parent[key] = (state, g, d)
                        heapq.heappush(heap, (arr + hn, math.hypot(nx - gx, ny - gy), next(counter), arr, key))
                    break
    return None


def _reconstruct(state, g: int, parent, t_end: int) -> TimedPath:
    chain: list[tuple[CellCoord, int, int]] = []  # cell, arrival, departure
    cur, arrival, dep = state, g, t_end
    while True:
        chain.append((cur[0], arrival, dep))
        link = parent[cur]
        if link is None:
            break
        cur, arrival, dep = link
    chain.reverse()
    wps: list[Waypoint] = []
    for cell, arr, dep in chain:
        cx, cy = cell[0] + 0.5, cell[1] + 0.5
        wps.append((float(arr), cx, cy))
        if dep > arr:
            wps.append((float(dep), cx, cy))
    return TimedPath(tuple(wps))


@dataclass
class Resolution:
    paths: list[TimedPath]
    introduced: int
    remaining: int
    replans: int = 0
    reverts: int = 0
    events: list[ConflictEvent] = field(default_factory=list)

    @property
    def resolved(self) -> int:
        return self.introduced - self.remaining


class _SegmentedPaths:
    """Per-agent trajectories split at pinned times, with per-segment status."""

    ORIGINAL, SMOOTHED, REPLANNED = "original", "smoothed", "replanned"

    def __init__(self, paths: Sequence[TimedPath], plan: DiscretePlan, pins: list[list[int]]):
        self.plan = plan
        self.pins = pins
        self.t_max = plan.t_max
        self.raw = [TimedPath.from_cells(plan.path(a)).waypoints for a in range(plan.num_agents)]
        self.segments: list[list[list[Waypoint]]] = []
        self.status: list[list[str]] = []
        self.replans: list[list[int]] = []
        self.times = np.arange(0, self.t_max + 1, dtype=float)
        n = len(paths)
        self.pos = np.stack([p.sample(self.times) for p in paths]) if n else np.zeros((0, len(self.times), 2))
        raw_pos = plan.positions().transpose(1, 0, 2).astype(float) + 0.5 if n else self.pos
        # prefix count of timesteps where the given path leaves the raw one
        off = np.abs(self.pos - raw_pos).max(axis=2) > 1e-12 if n else np.zeros((0, len(self.times)), bool)
        off_count = np.concatenate([np.zeros((n, 1), dtype=np.int64), off.cumsum(axis=1)], axis=1)
        for a, path in enumerate(paths):
            wp = list(path.waypoints)
            segs, stats = [], []
            for t0, t1 in zip(pins[a], pins[a][1:]):
                seg = [w for w in wp if t0 <= w[0] <= t1]
                if not seg or seg[0][0] != t0 or seg[-1][0] != t1:
                    raise ValueError(f"agent {a}: path does not pass through its pins at t={t0}, t={t1}")
                segs.append(seg)
                same = off_count[a, t1 + 1] - off_count[a, t0] == 0
                stats.append(self.ORIGINAL if same else self.SMOOTHED)
            if len(pins[a]) == 1:
                segs.append([wp[0]])
                stats.append(self.ORIGINAL)
            self.segments.append(segs)
            self.status.append(stats)
            self.replans.append([0] * len(segs))

    def path(self, a: int) -> TimedPath:
        out: list[Waypoint] = []
        for seg in self.segments[a]:
            out.extend(seg if not out else seg[1:])
        return TimedPath(tuple(out))

    def segment_at(self, a: int, t: float) -> int:
        pins = self.pins[a]
        if len(pins) == 1:
            return 0
        k = int(np.searchsorted(pins, t, side="right")) - 1
        return min(max(k, 0), len(pins) - 2)

    def set_segment(self, a: int, k: int, seg: list[Waypoint], status: str) -> None:
        self.segments[a][k] = seg
        self.status[a][k] = status
        self.pos[a] = self.path(a).sample(self.times)

    def revert(self, a: int, k: int) -> None:
        t0, t1 = self.pins[a][k], self.pins[a][k + 1] if len(self.pins[a]) > 1 else self.pins[a][k]
        self.set_segment(a, k, list(self.raw[a][t0 : t1 + 1]), self.ORIGINAL)

    def smoothed_count(self) -> int:
        return sum(s != self.ORIGINAL for stats in self.status for s in stats)


def _search_box(gmap: GridMap, *waypoint_lists: Sequence[Waypoint]) -> tuple[int, int, int, int]:
    xs = [w[1] for wl in waypoint_lists for w in wl]
    ys = [w[2] for wl in waypoint_lists for w in wl]
    return (
        max(0, int(math.floor(min(xs))) - SIPP_MARGIN),
        min(gmap.width - 1, int(math.floor(max(xs))) + SIPP_MARGIN),
        max(0, int(math.floor(min(ys))) - SIPP_MARGIN),
        min(gmap.height - 1, int(math.floor(max(ys))) + SIPP_MARGIN),
    )


def _corridor(box: tuple[int, int, int, int], raw: Sequence[Waypoint], current: np.ndarray) -> np.ndarray:
    """Box cells within SIPP_MARGIN moves of the raw or current trajectory."""
    x_lo, x_hi, y_lo, y_hi = box
    mask = np.zeros((y_hi - y_lo + 1, x_hi - x_lo + 1), dtype=bool)
    pts = np.concatenate([np.array([(w[1], w[2]) for w in raw]), current])
    cells = np.floor(pts).astype(np.int64)
    mask[cells[:, 1] - y_lo, cells[:, 0] - x_lo] = True
    size = 2 * SIPP_MARGIN + 1
    return ndimage.maximum_filter(mask, size=size, mode="constant", cval=False)


def resolve_report(
    paths: Sequence[TimedPath],
    original: DiscretePlan,
    gmap: GridMap,
    conn: Connectivity,
    radius: float = DEFAULT_RADIUS,
    schedule: InteractionSchedule | None = None,
    corner_cutting: bool = False,
) -> Resolution:
    """Repair every intersection, earliest first.

    The lower-priority agent (higher index) of a conflicting pair is
    replanned with SIPP inside the pinned segment that brackets the
    conflict.  When that fails, both agents' bracketing segments fall back to
    the unsmoothed plan.  Reverted segments are never touched again, which
    bounds the number of iterations.
    """
    conn = Connectivity.parse(conn)
    n = len(paths)
    if schedule is None:
        pins = [sorted({0, original.t_max}) for _ in range(n)]
    else:
        pins = [split_times(original, schedule, a) for a in range(n)]
    for p in paths:
        for w in p.waypoints:
            if w[0] != round(w[0]):
                raise ValueError("resolve expects waypoints at integer times")
    state = _SegmentedPaths(paths, original, pins)
    times = state.times
    events = _detect_on_grid(state.pos, times, radius) if n > 1 else []
    initial = list(events)
    replans = reverts = 0
    while events:
        ev = events[0]
        i, j = ev.agents
        t_probe = _probe_time(ev)
        ki, kj = state.segment_at(i, t_probe), state.segment_at(j, t_probe)
        changed: set[int]
        target = None
        for a, k in ((j, kj), (i, ki)):
            if state.status[a][k] != state.ORIGINAL and state.replans[a][k] < MAX_REPLANS_PER_SEGMENT:
                target = (a, k)
                break
        new_seg = None
        if target is not None:
            a, k = target
            new_seg = _try_sipp(state, a, k, gmap, conn, radius, corner_cutting)
        if new_seg is not None:
            a, k = target
            state.set_segment(a, k, new_seg, state.REPLANNED)
            state.replans[a][k] += 1
            replans += 1
            changed = {a}
        else:
            if state.status[i][ki] == state.ORIGINAL and state.status[j][kj] == state.ORIGINAL:
                raise ResolutionError(
                    f"agents {i} and {j} collide at t={ev.time:.3f} on unsmoothed segments"
                )
            state.revert(i, ki)
            state.revert(j, kj)
            reverts += 1
            changed = {i, j}
        events = [e for e in events if not (set(e.agents) & changed)]
        events.extend(_detect_on_grid(state.pos, times, radius, sorted(changed)))
        events.sort(key=lambda e: (e.time, e.agents))
    final = [state.path(a) for a in range(n)]
    return Resolution(final, len(initial), 0, replans, reverts, initial)


def _probe_time(ev: ConflictEvent) -> float:
    lo, hi = ev.window
    t = ev.time
    # step off the exact window edge so the probe lands inside the conflicting piece
    if t <= lo:
        return lo + min(0.5, (hi - lo) / 2)
    if t >= hi:
        return hi - min(0.5, (hi - lo) / 2)
    return t


def _try_sipp(
    state: _SegmentedPaths,
    a: int,
    k: int,
    gmap: GridMap,
    conn: Connectivity,
    radius: float,
    corner_cutting: bool,
) -> list[Waypoint] | None:
    pins = state.pins[a]
    if len(pins) < 2:
        return None
    t0, t1 = pins[k], pins[k + 1]
    raw = state.raw[a][t0 : t1 + 1]
    start = PinnedWaypoint(t0, state.plan.configs[t0][a])
    goal = PinnedWaypoint(t1, state.plan.configs[t1][a])
    others = np.delete(state.pos, a, axis=0)
    box = _search_box(gmap, raw, state.segments[a][k])
    # only agents that come near the search box during the window matter
    window = others[:, t0 : t1 + 1]
    lo = np.array([box[0], box[2]], dtype=float) - 2 * radius - 1
    hi = np.array([box[1], box[3]], dtype=float) + 2 * radius + 2
    near = ((window >= lo) & (window <= hi)).all(axis=2).any(axis=1)
    corridor = _corridor(box, raw, state.pos[a, t0 : t1 + 1])
    result = sipp_replan(a, (start, goal), gmap, window[near], conn, radius, box, corner_cutting, corridor)
    if result is None:
        return None
    seg = list(result.waypoints)
    if arclength_of(seg) > arclength_of(raw) + 1e-9:
        return None
    return seg


def resolve(
    paths: Sequence[TimedPath],
    original: DiscretePlan,
    gmap: GridMap,
    conn: Connectivity,
    radius: float = DEFAULT_RADIUS,
    schedule: InteractionSchedule | None = None,
) -> list[TimedPath]:
    return resolve_report(paths, original, gmap, conn, radius, schedule).paths
