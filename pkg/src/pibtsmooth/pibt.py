"""PiBT (priority inheritance with backtracking) on 4- and 8-connected grids.

Besides the classic vertex and swap checks, every pair of agents must keep a
clearance of ``2 * radius`` between their centers while both move along
straight unit-time segments.  This rejects the crossing-diagonal swaps of
eight-connected grids, diagonal moves that clip the corner of an occupied
cell, and 90 degree follow-the-leader turns, all of which bring two unit
discs closer than one cell.
"""

from __future__ import annotations

import math
import random
import sys
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .benchmark_io import Scenario, validate_scenario
from .grid import SQRT2, CellCoord, Connectivity, DistanceField, GridMap, distance_fields

Config = tuple[CellCoord, ...]

DEFAULT_RADIUS = 0.5
HORIZON_CAP = 10_000
REPEAT_LIMIT = 3


class PlanningError(ValueError):
    """The scenario cannot be planned at all (e.g. an unreachable goal)."""


@dataclass
class PriorityState:
    base: list[int]
    tiebreak: list[float]

    @classmethod
    def initial(cls, n: int, seed: int) -> "PriorityState":
        order = list(range(n))
        random.Random(seed).shuffle(order)
        return cls([0] * n, [order[i] / n for i in range(n)] if n else [])

    def effective(self, i: int) -> float:
        return self.base[i] + self.tiebreak[i]

    def update(self, config: Sequence[CellCoord], goals: Sequence[CellCoord]) -> None:
        for i, (pos, goal) in enumerate(zip(config, goals)):
            self.base[i] = 0 if pos == goal else self.base[i] + 1


@dataclass
class DiscretePlan:
    configs: list[Config]
    goals: list[CellCoord]
    solved: bool
    connectivity: Connectivity = Connectivity.EIGHT

    @property
    def t_max(self) -> int:
        return len(self.configs) - 1

    @property
    def num_agents(self) -> int:
        return len(self.goals)

    def path(self, agent: int) -> list[CellCoord]:
        return [cfg[agent] for cfg in self.configs]

    def positions(self) -> np.ndarray:
        """Array of shape (t_max + 1, agents, 2) holding (x, y) cells."""
        return np.asarray(self.configs, dtype=np.int64).reshape(len(self.configs), self.num_agents, 2)


def pair_clear(
    a0: CellCoord, a1: CellCoord, b0: CellCoord, b1: CellCoord, radius: float = DEFAULT_RADIUS
) -> bool:
    """True if two agents moving a0->a1 and b0->b1 over the same unit of time
    never come closer than ``2 * radius`` (touching exactly is allowed)."""
    d0x, d0y = b0[0] - a0[0], b0[1] - a0[1]
    ex = (b1[0] - a1[0]) - d0x
    ey = (b1[1] - a1[1]) - d0y
    return _clear(d0x, d0y, ex, ey, 4.0 * radius * radius)


def _clear(d0x: int, d0y: int, ex: int, ey: int, thr: float) -> bool:
    d00 = d0x * d0x + d0y * d0y
    ee = ex * ex + ey * ey
    if ee == 0:
        return d00 >= thr
    de = d0x * ex + d0y * ey
    if de >= 0:
        return d00 >= thr
    if -de >= ee:
        d1x, d1y = d0x + ex, d0y + ey
        return d1x * d1x + d1y * d1y >= thr
    # interior minimum: |d0|^2 - (d0.e)^2 / |e|^2
    return d00 * ee - de * de >= thr * ee


def move_valid(
    src: Sequence[CellCoord],
    dst: Sequence[CellCoord],
    conn: Connectivity,
    gmap: GridMap | None = None,
    corner_cutting: bool = False,
    radius: float = DEFAULT_RADIUS,
) -> bool:
    """Check one joint transition of all agents."""
    conn = Connectivity.parse(conn)
    if len(src) != len(dst):
        return False
    if len(set(dst)) != len(dst):
        return False
    for a, b in zip(src, dst):
        dx, dy = b[0] - a[0], b[1] - a[1]
        if abs(dx) > 1 or abs(dy) > 1:
            return False
        if conn is Connectivity.FOUR and dx and dy:
            return False
        if gmap is not None:
            if not gmap.passable(b):
                return False
            if dx and dy and not corner_cutting:
                if not (gmap.passable((a[0] + dx, a[1])) and gmap.passable((a[0], a[1] + dy))):
                    return False
    where = {c: i for i, c in enumerate(src)}
    for i, (a, b) in enumerate(zip(src, dst)):
        j = where.get(b)
        if j is not None and j != i and dst[j] == a:
            return False
    thr = 4.0 * radius * radius
    reach = 2 + math.ceil(2 * radius)
    order = sorted(range(len(src)), key=lambda k: src[k])
    for p, i in enumerate(order):
        a0, a1 = src[i], dst[i]
        for j in order[p + 1 :]:
            b0 = src[j]
            if b0[0] - a0[0] > reach:
                break
            if abs(b0[1] - a0[1]) > reach:
                continue
            b1 = dst[j]
            d0x, d0y = b0[0] - a0[0], b0[1] - a0[1]
            if not _clear(d0x, d0y, (b1[0] - a1[0]) - d0x, (b1[1] - a1[1]) - d0y, thr):
                return False
    return True


FAIL, MOVED, YIELDED = 0, 1, 2


class _Stepper:
    """One PiBT configuration step over flat cell indices."""

    def __init__(
        self,
        gmap: GridMap,
        conn: Connectivity,
        dists: Sequence[np.ndarray],
        corner_cutting: bool,
        radius: float,
        goals: Sequence[int],
    ):
        self.width = gmap.width
        self.goals = list(goals)
        self.nbrs = gmap.neighbor_table(conn, corner_cutting)
        self.dists = [memoryview(np.ascontiguousarray(d, dtype=np.float64).ravel()) for d in dists]
        self.thr = 4.0 * radius * radius
        # neighborhood scanned for clearance: agents start within this many cells
        r = 2 + math.ceil(2 * radius)
        w = self.width
        self.near_offsets = [
            (dx, dy) for dy in range(-r, r + 1) for dx in range(-r, r + 1) if dx or dy
        ]
        self.reach = r
        self.w = w
        self.h = gmap.height

    def step(self, cur: list[int], order: Sequence[int], rng: random.Random) -> list[int]:
        n = len(cur)
        self.cur = cur
        self.nxt: list[int | None] = [None] * n
        self.occ_now = {v: i for i, v in enumerate(cur)}
        self.occ_next: dict[int, int] = {}
        self.rng = rng
        self.near_cache: dict[int, list[int]] = {}
        self.stack: set[int] = set()
        for i in order:
            if self.nxt[i] is None:
                self._pibt(i, None)
        return self.nxt  # type: ignore[return-value]

    def _near(self, i: int) -> list[int]:
        out = self.near_cache.get(i)
        if out is None:
            v = self.cur[i]
            w, h = self.w, self.h
            x, y = v % w, v // w
            occ = self.occ_now
            out = []
            for dx, dy in self.near_offsets:
                nx, ny = x + dx, y + dy
                if 0 <= nx < w and 0 <= ny < h:
                    k = occ.get(ny * w + nx)
                    if k is not None:
                        out.append(k)
            self.near_cache[i] = out
        return out

    def _pibt(self, i: int, caller: int | None) -> int:
        """Plan agent ``i``; returns FAIL, MOVED or YIELDED.

        YIELDED means ``i`` left the cell the caller wanted, but on a move that
        only clears the caller if the caller stays put this step (a sidestep
        while the caller enters would be a follow turn closer than 2r).

        Agents on the push stack hold tentative moves that may be undone, so
        nobody enters their cells and every move must also clear them staying.
        """
        stack = self.stack
        stack.add(i)
        try:
            return self._plan_one(i, caller)
        finally:
            stack.discard(i)

    def _plan_one(self, i: int, caller: int | None) -> int:
        cur, nxt, occ_next, occ_now, stack = self.cur, self.nxt, self.occ_next, self.occ_now, self.stack
        w, thr = self.w, self.thr
        v = cur[i]
        vx, vy = v % w, v // w
        cands = [v, *self.nbrs[v]]
        self.rng.shuffle(cands)
        d = self.dists[i]
        cands.sort(key=d.__getitem__)
        near = self._near(i)
        puller, pull_to = self._swap_partner(i, cands[0])
        if puller is not None:
            cands.reverse()
        elif caller is not None:
            # moves that would just make the caller swap with us again go last
            cands.sort(key=lambda u: u != v and self._swap_required(caller, i, v, u))
        for u in cands:
            if u in occ_next:
                continue
            k = occ_now.get(u)
            if k is not None and k != i and nxt[k] == v:
                continue  # swap
            if k is not None and k != i and k in stack:
                continue
            ux, uy = u % w, u // w
            ok = True
            yielded = False
            for m in near:
                mt = nxt[m]
                if mt is None:
                    if m == k:
                        continue  # will be pushed and checked when it plans
                    mt = cur[m]
                m0 = cur[m]
                d0x, d0y = m0 % w - vx, m0 // w - vy
                if m in stack and not _clear(d0x, d0y, -ux + vx, -uy + vy, thr):
                    ok = False
                    break
                if not _clear(d0x, d0y, mt % w - ux - d0x, mt // w - uy - d0y, thr):
                    if m == caller:
                        yielded = True
                        continue
                    ok = False
                    break
            if not ok:
                continue
            nxt[i] = u
            occ_next[u] = i
            if k is not None and k != i and nxt[k] is None:
                if self._pibt(k, i) != MOVED:
                    # a failed child now holds u itself (it stays put)
                    if occ_next.get(u) == i:
                        del occ_next[u]
                    nxt[i] = None
                    continue
            if yielded:
                return YIELDED
            if puller is not None and u != v and nxt[puller] is None and pull_to not in occ_next:
                if self._move_clear(puller, pull_to, i):
                    nxt[puller] = pull_to
                    occ_next[pull_to] = puller
            return MOVED
        nxt[i] = v
        occ_next[v] = i
        return FAIL

    def _move_clear(self, i: int, u: int, leader: int) -> bool:
        """Clearance of i's move to u against everyone planned or standing still.

        ``leader`` has already committed its move, so it need not be cleared
        as if it stayed.
        """
        cur, nxt, stack, w, thr = self.cur, self.nxt, self.stack, self.w, self.thr
        v = cur[i]
        vx, vy, ux, uy = v % w, v // w, u % w, u // w
        for m in self._near(i):
            mt = nxt[m]
            if mt is None:
                mt = cur[m]
            m0 = cur[m]
            d0x, d0y = m0 % w - vx, m0 // w - vy
            if m != leader and m in stack and not _clear(d0x, d0y, -ux + vx, -uy + vy, thr):
                return False
            if not _clear(d0x, d0y, mt % w - ux - d0x, mt // w - uy - d0y, thr):
                return False
        return True

    # Corridor swaps: when i's best cell holds an agent that can only be pushed
    # down a chain of degree-two cells past i's goal, i backs out instead and
    # pulls that agent along until the pair reaches a branching cell.

    def _branches(self, v: int, came_from: int) -> tuple[int, int]:
        """Count v's exits other than ``came_from`` (dead ends held by parked
        agents excluded), plus one such exit."""
        nbrs, occ, goals = self.nbrs, self.occ_now, self.goals
        n, last = 0, -1
        for u in nbrs[v]:
            if u == came_from:
                continue
            if len(nbrs[u]) == 1:
                a = occ.get(u)
                if a is not None and goals[a] == u:
                    continue
            n += 1
            last = u
        return n, last

    def _swap_partner(self, i: int, best: int) -> tuple[int | None, int]:
        """The agent i should pull, and the cell it is pulled into.

        The blocker is either on ``best`` (pulled into i's cell) or one chain
        cell further with ``best`` empty (pulled into ``best``); the gap lets
        the pair turn corners without a follow turn.
        """
        v = self.cur[i]
        if best == v:
            return None, v
        occ, nxt, stack = self.occ_now, self.nxt, self.stack
        j = occ.get(best)
        if j is not None:
            if nxt[j] is None and j not in stack and self._swap_required(i, j, v, best) and self._swap_possible(best, v):
                return j, v
            return None, v
        n, ahead = self._branches(best, v)
        if n != 1:
            return None, v
        j = occ.get(ahead)
        if j is None or nxt[j] is not None or j in stack:
            return None, v
        if self._swap_required(i, j, best, ahead) and self._swap_possible(best, v):
            return j, best
        return None, v

    def _swap_required(self, pusher: int, puller: int, v_pusher: int, v_puller: int) -> bool:
        dp, dq = self.dists[pusher], self.dists[puller]
        for _ in range(len(self.nbrs)):
            if not dp[v_puller] < dp[v_pusher]:
                break
            n, nxt_cell = self._branches(v_puller, v_pusher)
            if n >= 2:
                return False
            if n == 0:
                break
            v_pusher, v_puller = v_puller, nxt_cell
        return dq[v_pusher] < dq[v_puller] and (dp[v_pusher] == 0 or dp[v_puller] < dp[v_pusher])

    def _swap_possible(self, v_pusher: int, v_puller: int) -> bool:
        origin = v_pusher
        for _ in range(len(self.nbrs)):
            if v_puller == origin:
                return False
            n, nxt_cell = self._branches(v_puller, v_pusher)
            if n >= 2:
                return True
            if n == 0:
                return False
            v_pusher, v_puller = v_puller, nxt_cell
        return False


def _planner_fields(
    gmap: GridMap,
    goals: Sequence[CellCoord],
    conn: Connectivity,
    corner_cutting: bool,
    diagonal_cost: float,
) -> list[DistanceField]:
    return distance_fields(gmap, goals, conn, corner_cutting, diagonal_cost)


def pibt_step(
    current: Sequence[CellCoord],
    priorities: PriorityState,
    fields: Sequence[DistanceField],
    conn: Connectivity,
    rng_seed: int,
    gmap: GridMap,
    corner_cutting: bool = False,
    radius: float = DEFAULT_RADIUS,
) -> Config:
    conn = Connectivity.parse(conn)
    goals = [gmap.index(f.goal) for f in fields]
    stepper = _Stepper(gmap, conn, [f.dist for f in fields], corner_cutting, radius, goals)
    order = sorted(range(len(current)), key=lambda i: -priorities.effective(i))
    cur = [gmap.index(c) for c in current]
    nxt = stepper.step(cur, order, random.Random(rng_seed))
    return tuple(gmap.cell(v) for v in nxt)


def _detour_fields(
    gmap: GridMap, goals: Sequence[int], parked: Sequence[int], graph
) -> list[np.ndarray]:
    """Cost-to-go fields in which passing a parked cell costs extra.

    The penalty is large enough that any free way around is preferred, yet
    finite so that an agent with no alternative still pushes through.
    """
    penalty = float(gmap.width + gmap.height)
    g = graph.tocoo(copy=True)
    hit = np.zeros(gmap.width * gmap.height, dtype=bool)
    hit[list(parked)] = True
    # searching outward from the goal, an edge row -> col is the forward move
    # col -> row, so charging col makes every parked cell cost extra to stand on
    g.data = g.data + penalty * hit[g.col]
    d = dijkstra(g.tocsr(), directed=True, indices=list(goals))
    return [np.ascontiguousarray(row, dtype=np.float64) for row in np.atleast_2d(d)]


def default_horizon(fields: Sequence[DistanceField], starts: Sequence[CellCoord]) -> int:
    if not fields:
        return 0
    worst = max(f[s] for f, s in zip(fields, starts))
    return int(min(HORIZON_CAP, max(1, math.ceil(10 * worst))))


def plan(
    scenario: Scenario,
    gmap: GridMap,
    conn: Connectivity = Connectivity.EIGHT,
    horizon: int | None = None,
    rng_seed: int = 0,
    corner_cutting: bool = False,
    radius: float = DEFAULT_RADIUS,
    diagonal_cost: float = 1.0,
    fields: Sequence[DistanceField] | None = None,
) -> DiscretePlan:
    """Run PiBT steps until every agent sits on its goal or ``horizon`` runs out.

    ``diagonal_cost`` sets the edge weight of diagonal moves in the distance
    fields that order candidate moves (1.0 = time to goal, since every move
    takes one timestep).
    """
    conn = Connectivity.parse(conn)
    validate_scenario(scenario, gmap)
    starts, goals = list(scenario.starts), list(scenario.goals)
    if fields is None:
        fields = _planner_fields(gmap, goals, conn, corner_cutting, diagonal_cost)
    for i, (f, s) in enumerate(zip(fields, starts)):
        if not math.isfinite(f[s]):
            raise PlanningError(f"agent {i}: goal {goals[i]} is unreachable from start {s}")
    if horizon is None:
        horizon = default_horizon(fields, starts)

    limit = sys.getrecursionlimit()
    if limit < 4 * len(starts) + 100:
        sys.setrecursionlimit(4 * len(starts) + 100)

    goal_idx = [gmap.index(g) for g in goals]
    stepper = _Stepper(gmap, conn, [f.dist for f in fields], corner_cutting, radius, goal_idx)
    prio = PriorityState.initial(len(starts), rng_seed)
    rng = random.Random(rng_seed)
    cur = [gmap.index(s) for s in starts]
    flat_configs = [cur]
    seen: dict[tuple[int, ...], int] = {}
    base_dists = list(stepper.dists)
    base_graph = gmap.move_graph(conn, corner_cutting, diagonal_cost)
    detouring: set[int] = set()
    parked: set[int] = set()  # goal cells occupied since the last repeat
    for _ in range(horizon):
        if cur == goal_idx:
            break
        order = sorted(range(len(cur)), key=lambda i: -(prio.base[i] + prio.tiebreak[i]))
        cur = stepper.step(cur, order, rng)
        for i, (v, g) in enumerate(zip(cur, goal_idx)):
            if v == g:
                prio.base[i] = 0
                parked.add(v)
            else:
                prio.base[i] += 1
        flat_configs.append(cur)
        key = tuple(cur)
        seen[key] = seen.get(key, 0) + 1
        if seen[key] > REPEAT_LIMIT:
            # the same configuration keeps coming back: shake up who leads and
            # steer the stuck agents around whoever already sits on a goal
            stuck = [i for i, (v, g) in enumerate(zip(cur, goal_idx)) if v != g]
            for i in stuck:
                prio.tiebreak[i] = rng.random() * len(cur)
            if parked and stuck:
                detours = _detour_fields(gmap, [goal_idx[i] for i in stuck], sorted(parked), base_graph)
                for i, d in zip(stuck, detours):
                    stepper.dists[i] = memoryview(d)
                    detouring.add(i)
            seen.clear()
            parked.clear()
        for i in [i for i in detouring if cur[i] == goal_idx[i]]:
            stepper.dists[i] = base_dists[i]
            detouring.discard(i)
    w = gmap.width
    configs = [tuple((v % w, v // w) for v in cfg) for cfg in flat_configs]
    return DiscretePlan(configs, goals, cur == goal_idx, conn)
