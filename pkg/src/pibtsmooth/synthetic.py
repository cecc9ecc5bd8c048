"""Stand-in benchmark maps and random scenarios.

Used when the MovingAI files are not available locally.  The generators
mimic the two map families that matter for the experiments: open city maps
with scattered building blocks, and warehouse floors of shelf rows separated
by one-cell corridors.
"""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np
from scipy import ndimage

from .benchmark_io import Scenario, ScenarioRow, format_map, format_scenario
from .grid import CellCoord, GridMap


def keep_largest_component(blocked: np.ndarray) -> np.ndarray:
    """Block every free cell outside the largest 4-connected free region."""
    labels, count = ndimage.label(~blocked)
    if count <= 1:
        return blocked
    sizes = ndimage.sum(np.ones_like(labels), labels, index=range(1, count + 1))
    keep = 1 + int(np.argmax(sizes))
    return blocked | (labels != keep)


def open_city(size: int = 256, seed: int = 1, coverage: float = 0.24, name: str = "") -> GridMap:
    rng = random.Random(seed)
    blocked = np.zeros((size, size), dtype=bool)
    while blocked.mean() < coverage:
        w, h = rng.randint(3, 22), rng.randint(3, 22)
        x, y = rng.randrange(0, size - w), rng.randrange(0, size - h)
        blocked[y : y + h, x : x + w] = True
    return GridMap(size, size, keep_largest_component(blocked), name or f"synthetic-city-{size}")


def warehouse(
    shelf_cols: int = 20,
    shelf_rows: int = 40,
    shelf_len: int = 10,
    shelf_depth: int = 2,
    corridor: int = 1,
    aisle: int = 3,
    margin_x: int = 32,
    margin_y: int = 2,
    name: str = "",
) -> GridMap:
    width = 2 * margin_x + shelf_cols * shelf_len + (shelf_cols - 1) * aisle
    height = 2 * margin_y + shelf_rows * shelf_depth + (shelf_rows - 1) * corridor
    blocked = np.zeros((height, width), dtype=bool)
    for r in range(shelf_rows):
        y = margin_y + r * (shelf_depth + corridor)
        for c in range(shelf_cols):
            x = margin_x + c * (shelf_len + aisle)
            blocked[y : y + shelf_depth, x : x + shelf_len] = True
    return GridMap(width, height, blocked, name or f"synthetic-warehouse-{shelf_cols}-{shelf_rows}")


def random_obstacles(size: int = 32, density: float = 0.2, seed: int = 1, name: str = "") -> GridMap:
    rng = np.random.default_rng(seed)
    blocked = rng.random((size, size)) < density
    return GridMap(size, size, keep_largest_component(blocked), name or f"synthetic-random-{size}")


def rooms(size: int = 64, room: int = 8, seed: int = 1, name: str = "") -> GridMap:
    """Square rooms separated by walls with one or two random doors each."""
    rng = random.Random(seed)
    blocked = np.zeros((size, size), dtype=bool)
    for k in range(room, size, room + 1):
        blocked[k, :] = True
        blocked[:, k] = True
    for k in range(room, size, room + 1):
        for lo in range(0, size, room + 1):
            hi = min(lo + room, size)
            for _ in range(2):
                d = rng.randrange(lo, hi)
                blocked[k, d] = False
                d = rng.randrange(lo, hi)
                blocked[d, k] = False
    return GridMap(size, size, keep_largest_component(blocked), name or f"synthetic-rooms-{size}")


def random_scenario(gmap: GridMap, agents: int, seed: int, name: str = "") -> Scenario:
    """Distinct random starts and distinct random goals on free cells."""
    rng = random.Random(seed)
    ys, xs = np.nonzero(~gmap.blocked)
    free: list[CellCoord] = [(int(x), int(y)) for x, y in zip(xs, ys)]
    if agents > len(free):
        raise ValueError(f"map has {len(free)} free cells, {agents} agents requested")
    starts = rng.sample(free, agents)
    goals = rng.sample(free, agents)
    rows = [
        ScenarioRow(i // 10, gmap.name + ".map", gmap.width, gmap.height, s, g, 0.0)
        for i, (s, g) in enumerate(zip(starts, goals))
    ]
    return Scenario(gmap.name + ".map", starts, goals, rows, name)


STANDINS = {
    "city": lambda: open_city(256, seed=1, name="synthetic-city-256"),
    "warehouse": lambda: warehouse(name="synthetic-warehouse-20-40"),
    "random": lambda: random_obstacles(64, 0.1, seed=1, name="synthetic-random-64-64-10"),
    "rooms": lambda: rooms(64, 8, seed=1, name="synthetic-rooms-64"),
}


def write_standins(out_dir: str | Path, agents: int = 500, scenarios: int = 25) -> list[Path]:
    """Write every stand-in map plus ``scenarios`` random scenario files each."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for key, make in STANDINS.items():
        gmap = make()
        map_path = out_dir / f"{gmap.name}.map"
        map_path.write_text(format_map(gmap))
        written.append(map_path)
        n = min(agents, int((~gmap.blocked).sum()) // 2)
        for k in range(1, scenarios + 1):
            scen = random_scenario(gmap, n, seed=1000 * k + len(key))
            scen_path = out_dir / f"{gmap.name}-random-{k}.scen"
            scen_path.write_text(format_scenario(scen, gmap, map_path.name))
            written.append(scen_path)
    return written
