"""MovingAI ``.map`` / ``.scen`` readers and the results CSV writer."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import CellCoord, Connectivity, GridMap

PASSABLE_GLYPHS = frozenset(".G")
BLOCKED_GLYPHS = frozenset("@OTW")

RESULT_COLUMNS = (
    "scenario",
    "agents",
    "connectivity",
    "seed",
    "pibt_time_s",
    "total_time_s",
    "arclength_raw",
    "arclength_smoothed",
    "reduction_pct",
    "makespan",
    "intersections_introduced",
    "intersections_resolved",
    "status",
)
TIMING_COLUMNS = ("pibt_time_s", "total_time_s")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ScenarioError(ValueError):
    """A scenario row that does not fit the map it references."""


def _text(data: bytes | str) -> str:
    return data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data


def parse_map(data: bytes | str, name: str = "") -> GridMap:
    lines = _text(data).splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(lines):
        raw = lines[i].strip()
        i += 1
        if not raw:
            continue
        if raw == "map":
            break
        parts = raw.split()
        if len(parts) != 2:
            raise ParseError(f"malformed header line {raw!r}", i)
        header[parts[0]] = parts[1]
    else:
        raise ParseError("missing 'map' line")
    if header.get("type") != "octile":
        raise ParseError(f"unsupported map type {header.get('type')!r}", 1)
    try:
        height = int(header["height"])
        width = int(header["width"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad or missing dimensions: {exc}") from exc
    if width <= 0 or height <= 0:
        raise ParseError(f"non-positive dimensions {width}x{height}")

    body = lines[i : i + height]
    if len(body) < height:
        raise ParseError(f"truncated body: expected {height} rows, found {len(body)}", i + len(body))
    blocked = np.zeros((height, width), dtype=bool)
    for r, row in enumerate(body):
        lineno = i + r + 1
        row = row.rstrip("\r\n")
        if len(row) != width:
            raise ParseError(f"row has {len(row)} cells, expected {width}", lineno)
        for c, ch in enumerate(row):
            if ch in BLOCKED_GLYPHS:
                blocked[r, c] = True
            elif ch not in PASSABLE_GLYPHS:
                raise ParseError(f"unknown glyph {ch!r} at column {c}", lineno)
    for extra, row in enumerate(lines[i + height :], start=i + height + 1):
        if row.strip():
            raise ParseError("trailing data after map body", extra)
    return GridMap(width, height, blocked, name)


def format_map(gmap: GridMap) -> str:
    rows = ["".join("@" if b else "." for b in row) for row in gmap.blocked]
    return "\n".join(["type octile", f"height {gmap.height}", f"width {gmap.width}", "map", *rows]) + "\n"


def load_map(path: str | Path) -> GridMap:
    path = Path(path)
    return parse_map(path.read_bytes(), path.stem)


@dataclass(frozen=True)
class ScenarioRow:
    bucket: int
    map_name: str
    width: int
    height: int
    start: CellCoord
    goal: CellCoord
    optimal_length: float


@dataclass
class Scenario:
    map_name: str
    starts: list[CellCoord]
    goals: list[CellCoord]
    rows: list[ScenarioRow] = field(default_factory=list)
    name: str = ""

    def __len__(self) -> int:
        return len(self.starts)

    @property
    def agents(self) -> list[tuple[CellCoord, CellCoord]]:
        return list(zip(self.starts, self.goals))


def parse_scenario(
    data: bytes | str, gmap: GridMap, agents: int | None = None, name: str = ""
) -> Scenario:
    """Read the first ``agents`` rows of a ``.scen`` file (all rows if None)."""
    lines = _text(data).splitlines()
    if not lines or not lines[0].lower().startswith("version"):
        raise ParseError("scenario must start with a 'version' line", 1)
    rows: list[ScenarioRow] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if agents is not None and len(rows) >= agents:
            break
        if not line.strip():
            continue
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 9:
            raise ParseError(f"expected 9 fields, found {len(parts)}", lineno)
        try:
            bucket = int(parts[0])
            w, h, sx, sy, gx, gy = (int(p) for p in parts[2:8])
            opt = float(parts[8])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        if (w, h) != (gmap.width, gmap.height):
            raise ScenarioError(
                f"line {lineno}: scenario is for a {w}x{h} map, map is {gmap.width}x{gmap.height}"
            )
        for label, cell in (("start", (sx, sy)), ("goal", (gx, gy))):
            if not gmap.passable(cell):
                raise ScenarioError(f"line {lineno}: {label} {cell} is not a passable cell")
        rows.append(ScenarioRow(bucket, parts[1].strip(), w, h, (sx, sy), (gx, gy), opt))
    if agents is not None and len(rows) < agents:
        raise ScenarioError(f"scenario has {len(rows)} rows, {agents} requested")
    scen = Scenario(
        map_name=rows[0].map_name if rows else gmap.name,
        starts=[r.start for r in rows],
        goals=[r.goal for r in rows],
        rows=rows,
        name=name,
    )
    validate_scenario(scen, gmap)
    return scen


def validate_scenario(scen: Scenario, gmap: GridMap) -> None:
    for label, cells in (("start", scen.starts), ("goal", scen.goals)):
        seen: dict[CellCoord, int] = {}
        for i, c in enumerate(cells):
            if not gmap.passable(c):
                raise ScenarioError(f"agent {i}: {label} {c} is not a passable cell")
            if c in seen:
                raise ScenarioError(f"agents {seen[c]} and {i} share {label} {c}")
            seen[c] = i


def load_scenario(path: str | Path, gmap: GridMap, agents: int | None = None) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_bytes(), gmap, agents, path.stem)


def format_scenario(scen: Scenario, gmap: GridMap, map_file: str) -> str:
    out = ["version 1"]
    for i, (s, g) in enumerate(scen.agents):
        opt = scen.rows[i].optimal_length if i < len(scen.rows) else 0.0
        out.append(
            "\t".join(
                str(v)
                for v in (i // 10, map_file, gmap.width, gmap.height, s[0], s[1], g[0], g[1], f"{opt:.8f}")
            )
        )
    return "\n".join(out) + "\n"


@dataclass
class RunRecord:
    scenario_name: str
    agent_count: int
    connectivity: Connectivity
    seed: int
    solve_time_pibt: float
    solve_time_total: float
    arclength_raw: float
    arclength_smoothed: float
    makespan: int
    intersections_introduced: int
    intersections_resolved: int
    status: str = "ok"

    @property
    def reduction_pct(self) -> float:
        if self.arclength_raw <= 0:
            return 0.0
        return 100.0 * (self.arclength_raw - self.arclength_smoothed) / self.arclength_raw

    def row(self) -> dict[str, str]:
        return {
            "scenario": self.scenario_name,
            "agents": str(self.agent_count),
            "connectivity": str(Connectivity.parse(self.connectivity).value),
            "seed": str(self.seed),
            "pibt_time_s": f"{self.solve_time_pibt:.6f}",
            "total_time_s": f"{self.solve_time_total:.6f}",
            "arclength_raw": f"{self.arclength_raw:.6f}",
            "arclength_smoothed": f"{self.arclength_smoothed:.6f}",
            "reduction_pct": f"{self.reduction_pct:.4f}",
            "makespan": str(self.makespan),
            "intersections_introduced": str(self.intersections_introduced),
            "intersections_resolved": str(self.intersections_resolved),
            "status": self.status,
        }


def write_results(records: Iterable[RunRecord]) -> bytes:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=RESULT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue().encode("utf-8")


def read_results(data: bytes | str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(_text(data))))


def failure_record(
    scenario_name: str, agent_count: int, conn: Connectivity, seed: int, status: str
) -> RunRecord:
    return RunRecord(scenario_name, agent_count, conn, seed, 0.0, 0.0, 0.0, 0.0, 0, 0, 0, status)


def scenario_from_cells(
    starts: Sequence[CellCoord], goals: Sequence[CellCoord], map_name: str = "", name: str = ""
) -> Scenario:
    return Scenario(map_name, list(starts), list(goals), [], name)
