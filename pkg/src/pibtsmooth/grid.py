"""Static occupancy grids, move neighborhoods and per-goal distance fields.

Cells are addressed as ``(x, y)`` with ``x`` the column and ``y`` the row.
Internally the planner works on flat indices ``y * width + x``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

CellCoord = tuple[int, int]

SQRT2 = math.sqrt(2.0)

CARDINAL = ((1, 0), (-1, 0), (0, 1), (0, -1))
DIAGONAL = ((1, 1), (1, -1), (-1, 1), (-1, -1))


class Connectivity(enum.Enum):
    FOUR = 4
    EIGHT = 8

    @classmethod
    def parse(cls, value: "int | str | Connectivity") -> "Connectivity":
        if isinstance(value, Connectivity):
            return value
        return cls(int(value))

    @property
    def offsets(self) -> tuple[tuple[int, int], ...]:
        return CARDINAL if self is Connectivity.FOUR else CARDINAL + DIAGONAL

    def hops(self, a: CellCoord, b: CellCoord) -> int:
        """Number of moves between two cells on an empty grid."""
        dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
        return dx + dy if self is Connectivity.FOUR else max(dx, dy)


class GridError(ValueError):
    """Raised for out-of-bounds or blocked cells handed to grid operations."""


@dataclass(eq=False)
class GridMap:
    """Immutable occupancy grid; ``blocked[y, x]`` is True for impassable cells."""

    width: int
    height: int
    blocked: np.ndarray
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise GridError(f"map dimensions must be positive, got {self.width}x{self.height}")
        blocked = np.asarray(self.blocked, dtype=bool)
        if blocked.shape != (self.height, self.width):
            raise GridError(
                f"blocked mask has shape {blocked.shape}, expected {(self.height, self.width)}"
            )
        blocked = blocked.copy()
        blocked.setflags(write=False)
        self.blocked = blocked

    @classmethod
    def empty(cls, width: int, height: int, name: str = "") -> "GridMap":
        return cls(width, height, np.zeros((height, width), dtype=bool), name)

    @classmethod
    def from_obstacles(
        cls, width: int, height: int, obstacles: Sequence[CellCoord], name: str = ""
    ) -> "GridMap":
        mask = np.zeros((height, width), dtype=bool)
        for x, y in obstacles:
            mask[y, x] = True
        return cls(width, height, mask, name)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridMap):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.blocked, other.blocked))
        )

    __hash__ = object.__hash__

    def in_bounds(self, cell: CellCoord) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def passable(self, cell: CellCoord) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height and not self.blocked[y, x]

    def obstacles(self) -> set[CellCoord]:
        ys, xs = np.nonzero(self.blocked)
        return {(int(x), int(y)) for x, y in zip(xs, ys)}

    def index(self, cell: CellCoord) -> int:
        return cell[1] * self.width + cell[0]

    def cell(self, index: int) -> CellCoord:
        return index % self.width, index // self.width

    def neighbor_table(self, conn: Connectivity, corner_cutting: bool = False) -> list[list[int]]:
        """Flat-index adjacency (excluding the wait move) for every cell.

        Blocked cells get an empty list.
        """
        key = ("nbrs", conn, corner_cutting)
        table = self._cache.get(key)
        if table is None:
            graph = self.move_graph(conn, corner_cutting)
            idx = graph.indices.astype(np.int64)
            table = [row.tolist() for row in np.split(idx, graph.indptr[1:-1])]
            self._cache[key] = table
        return table

    def move_graph(
        self, conn: Connectivity, corner_cutting: bool = False, diagonal_cost: float = SQRT2
    ) -> csr_matrix:
        key = ("graph", conn, corner_cutting, diagonal_cost)
        graph = self._cache.get(key)
        if graph is not None:
            return graph
        free = ~self.blocked
        h, w = self.height, self.width
        idx = np.arange(h * w).reshape(h, w)
        rows, cols, costs = [], [], []
        for dx, dy in conn.offsets:
            # source window [ys, xs] -> target window shifted by (dx, dy)
            sy = slice(max(0, -dy), h - max(0, dy))
            sx = slice(max(0, -dx), w - max(0, dx))
            ty = slice(max(0, dy), h - max(0, -dy))
            tx = slice(max(0, dx), w - max(0, -dx))
            ok = free[sy, sx] & free[ty, tx]
            if dx and dy and not corner_cutting:
                # flanking cells (x+dx, y) and (x, y+dy)
                fx = free[sy, tx]
                fy = free[ty, sx]
                ok &= fx & fy
            rows.append(idx[sy, sx][ok])
            cols.append(idx[ty, tx][ok])
            cost = diagonal_cost if dx and dy else 1.0
            costs.append(np.full(int(ok.sum()), cost))
        graph = csr_matrix(
            (np.concatenate(costs), (np.concatenate(rows), np.concatenate(cols))),
            shape=(h * w, h * w),
        )
        self._cache[key] = graph
        return graph


@dataclass(eq=False)
class DistanceField:
    goal: CellCoord
    connectivity: Connectivity
    dist: np.ndarray  # shape (height, width); inf where unreachable or blocked

    def __getitem__(self, cell: CellCoord) -> float:
        return float(self.dist[cell[1], cell[0]])


def _check_cell(gmap: GridMap, cell: CellCoord) -> None:
    if not gmap.in_bounds(cell):
        raise GridError(f"cell {cell} is outside the {gmap.width}x{gmap.height} map")
    if gmap.blocked[cell[1], cell[0]]:
        raise GridError(f"cell {cell} is blocked")


def neighbors(
    gmap: GridMap, cell: CellCoord, conn: Connectivity, corner_cutting: bool = False
) -> list[CellCoord]:
    """Cells reachable in one move from ``cell``, the wait move first."""
    _check_cell(gmap, cell)
    x, y = cell
    out = [cell]
    for dx, dy in conn.offsets:
        c = (x + dx, y + dy)
        if not gmap.passable(c):
            continue
        if dx and dy and not corner_cutting:
            if not (gmap.passable((x + dx, y)) and gmap.passable((x, y + dy))):
                continue
        out.append(c)
    return out


def distance_fields(
    gmap: GridMap,
    goals: Sequence[CellCoord],
    conn: Connectivity,
    corner_cutting: bool = False,
    diagonal_cost: float = SQRT2,
) -> list[DistanceField]:
    """Shortest move-cost distance from every cell to each goal.

    Moves are symmetric, so a single-source search from the goal gives the
    cost-to-go.  ``diagonal_cost`` only matters for eight-connected grids.
    """
    for g in goals:
        _check_cell(gmap, g)
    if not goals:
        return []
    graph = gmap.move_graph(conn, corner_cutting, diagonal_cost)
    out: list[DistanceField] = []
    batch = 32
    for lo in range(0, len(goals), batch):
        chunk = goals[lo : lo + batch]
        d = dijkstra(graph, directed=True, indices=[gmap.index(g) for g in chunk])
        d = np.atleast_2d(d)
        for g, row in zip(chunk, d):
            out.append(DistanceField(g, conn, row.reshape(gmap.height, gmap.width)))
    return out


def distance_field(
    gmap: GridMap,
    goal: CellCoord,
    conn: Connectivity,
    corner_cutting: bool = False,
    diagonal_cost: float = SQRT2,
) -> DistanceField:
    return distance_fields(gmap, [goal], conn, corner_cutting, diagonal_cost)[0]
