"""Arclength reduction per map and team size.

    python3 scripts/run_experiments.py --agents 4 25 100 --seeds 10 --out results.csv

Uses ``$MAPF_BENCHMARK_DIR`` / ``data/`` MovingAI files when present and the
stand-ins otherwise (same lookup as the test suite).
"""

import argparse
import statistics
import sys
from collections import defaultdict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

import benchdata  # noqa: E402
from pibtsmooth import RunConfig  # noqa: E402
from pibtsmooth.benchmark_io import write_results  # noqa: E402
from pibtsmooth.cli import sweep  # noqa: E402


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--maps", nargs="+", default=list(benchdata.MAPS))
    ap.add_argument("--agents", nargs="+", type=int, default=[4, 25, 100])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--conn", type=int, choices=(4, 8), default=8)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    configs = []
    for key in args.maps:
        bm = benchdata.locate(key)
        for n in args.agents:
            for k in range(args.seeds):
                configs.append(RunConfig(bm.map_path, bm.scen_path(k), n, args.conn, seed=k))
    outcomes = sweep(configs, jobs=args.jobs)
    records = [o.record for o in outcomes]
    if args.out:
        args.out.write_bytes(write_results(records))

    table = defaultdict(list)
    for cfg, rec in zip(configs, records):
        if rec.status == "ok":
            table[cfg.map_path.stem, cfg.agent_count].append(rec.reduction_pct)
    print(f"{'map':34} {'agents':>6} {'runs':>4} {'mean %':>7} {'sd':>5}")
    for (name, n), reds in sorted(table.items()):
        sd = statistics.stdev(reds) if len(reds) > 1 else 0.0
        print(f"{name:34} {n:6d} {len(reds):4d} {statistics.mean(reds):7.2f} {sd:5.2f}")


if __name__ == "__main__":
    main()
