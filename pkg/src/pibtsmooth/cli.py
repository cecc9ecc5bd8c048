"""Command line: ``solve`` one scenario or ``sweep`` a table of runs.

Exit codes: 0 ok, 2 parse or validation error, 3 unsolved within the
horizon, 4 collision left after resolution.

Sweep files are CSV (or tab separated) with a header row.  Recognised
columns: ``map, scen, agents`` (required) and ``conn, seed, smoothing,
radius, horizon`` (optional).  Relative paths resolve against the sweep
file's directory; blank lines and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .benchmark_io import ParseError, RunRecord, ScenarioError, failure_record, write_results
from .grid import Connectivity
from .pibt import DEFAULT_RADIUS, PlanningError
from .pipeline import SMOOTHING_MODES, RunConfig, format_trajectories, load_inputs, record_for, run_name, run_pipeline
from .resolution import ResolutionError

log = logging.getLogger("pibtsmooth")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_UNSOLVED = 3
EXIT_COLLISION = 4

STATUS_EXIT = {
    "ok": EXIT_OK,
    "parse_error": EXIT_INPUT,
    "validation_error": EXIT_INPUT,
    "unsolved": EXIT_UNSOLVED,
    "collision": EXIT_COLLISION,
    "resolution_error": EXIT_COLLISION,
}


@dataclass
class RunOutcome:
    record: RunRecord
    exit_code: int
    message: str = ""


def run(cfg: RunConfig) -> RunOutcome:
    """Parse, plan, smooth, resolve and measure one configuration.

    Writes the trajectory dump when ``cfg.dump_dir`` is set.  Never raises
    for bad inputs or failed runs; those come back as a status.
    """
    name = run_name(cfg)
    conn = cfg.connectivity

    def fail(status: str, message: str) -> RunOutcome:
        return RunOutcome(failure_record(name, cfg.agent_count, conn, cfg.seed, status), STATUS_EXIT[status], message)

    try:
        gmap, scen = load_inputs(cfg)
    except ParseError as exc:
        return fail("parse_error", f"{cfg.map_path} / {cfg.scen_path}: {exc}")
    except (ScenarioError, OSError) as exc:
        return fail("validation_error", str(exc))
    try:
        result = run_pipeline(scen, gmap, conn, cfg.seed, cfg.smoothing, cfg.radius, cfg.horizon)
    except PlanningError as exc:
        return fail("validation_error", str(exc))
    except ResolutionError as exc:
        return fail("resolution_error", str(exc))

    if not result.plan.solved:
        status, message = "unsolved", f"not solved within {result.plan.t_max} steps"
    elif not result.collision_free:
        status, message = "collision", f"{len(result.remaining)} intersections left after resolution"
    else:
        status, message = "ok", ""
    if cfg.dump_dir is not None:
        cfg.dump_dir.mkdir(parents=True, exist_ok=True)
        path = cfg.dump_dir / f"{name}-a{cfg.agent_count}-c{conn.value}-s{cfg.seed}-{cfg.smoothing}.traj"
        path.write_text(format_trajectories(result.final))
    return RunOutcome(record_for(result, name, conn, cfg.seed, status), STATUS_EXIT[status], message)


def read_sweep(text: str, base: Path = Path(".")) -> list[RunConfig]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        return []
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.DictReader(io.StringIO("\n".join(lines)), delimiter=delimiter)
    fields = {f.strip() for f in reader.fieldnames or []}
    missing = {"map", "scen", "agents"} - fields
    if missing:
        raise ParseError(f"sweep header lacks {sorted(missing)}", 1)
    configs = []
    for lineno, row in enumerate(reader, start=2):
        row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
        try:
            configs.append(
                RunConfig(
                    map_path=base / row["map"],
                    scen_path=base / row["scen"],
                    agent_count=int(row["agents"]),
                    connectivity=Connectivity.parse(row.get("conn") or 8),
                    seed=int(row.get("seed") or 0),
                    radius=float(row.get("radius") or DEFAULT_RADIUS),
                    horizon=int(row["horizon"]) if row.get("horizon") else None,
                    smoothing=row.get("smoothing") or "aware",
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
    return configs


def sweep(configs: Sequence[RunConfig], jobs: int = 1) -> list[RunOutcome]:
    """Run every config; output order follows input order."""
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, configs))
    return [run(cfg) for cfg in configs]


def _emit(records: list[RunRecord], out: Path | None) -> None:
    data = write_results(records)
    if out is None:
        sys.stdout.write(data.decode("utf-8"))
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(data)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pibtsmooth", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run the pipeline on one scenario")
    solve.add_argument("--map", required=True, type=Path)
    solve.add_argument("--scen", required=True, type=Path)
    solve.add_argument("--agents", required=True, type=int)
    solve.add_argument("--conn", type=int, choices=(4, 8), default=8)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--smoothing", choices=SMOOTHING_MODES, default="aware")
    solve.add_argument("--radius", type=float, default=DEFAULT_RADIUS)
    solve.add_argument("--horizon", type=int, default=None)
    solve.add_argument("--out", type=Path, default=None, help="results CSV (stdout if omitted)")
    solve.add_argument("--dump-trajectories", type=Path, default=None, metavar="DIR")

    sw = sub.add_parser("sweep", help="run every row of a sweep file")
    sw.add_argument("--spec", required=True, type=Path)
    sw.add_argument("--out", type=Path, default=None)
    sw.add_argument("--dump-trajectories", type=Path, default=None, metavar="DIR")
    sw.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "solve":
        try:
            cfg = RunConfig(
                args.map, args.scen, args.agents, args.conn, args.seed, args.radius,
                args.horizon, args.smoothing, args.out, args.dump_trajectories,
            )
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        outcome = run(cfg)
        if outcome.message:
            print(f"{outcome.record.status}: {outcome.message}", file=sys.stderr)
        _emit([outcome.record], args.out)
        return outcome.exit_code

    try:
        configs = read_sweep(args.spec.read_text(), args.spec.parent)
    except (OSError, ParseError, ValueError) as exc:
        print(f"error: {args.spec}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for cfg in configs:
        cfg.dump_dir = args.dump_trajectories
    outcomes = sweep(configs, args.jobs)
    for cfg, o in zip(configs, outcomes):
        if o.message:
            print(f"{cfg.scen_path.name} agents={cfg.agent_count} seed={cfg.seed}: {o.record.status}: {o.message}", file=sys.stderr)
    _emit([o.record for o in outcomes], args.out)
    return max((o.exit_code for o in outcomes), default=EXIT_OK)


if __name__ == "__main__":
    sys.exit(main())
