"""Smoothing mode (off / naive / aware) against connectivity on one map.

    python3 scripts/ablation.py --map berlin --agents 100 --seeds 5

Reports reduction, conflict events handed to resolution and the share of
wall time spent after PiBT.
"""

import argparse
import statistics
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

import benchdata  # noqa: E402
from pibtsmooth import RunConfig  # noqa: E402
from pibtsmooth.cli import sweep  # noqa: E402

MODES = ("off", "naive", "aware")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--map", default="berlin", choices=list(benchdata.MAPS))
    ap.add_argument("--agents", type=int, default=100)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    bm = benchdata.locate(args.map)
    print(f"{bm.name}, {args.agents} agents, {args.seeds} seeds")
    print(f"{'conn':>4} {'mode':>6} {'reduction %':>11} {'events':>7} {'post-PiBT share':>15}")
    for conn in (4, 8):
        for mode in MODES:
            cfgs = [RunConfig(bm.map_path, bm.scen_path(k), args.agents, conn, seed=k, smoothing=mode) for k in range(args.seeds)]
            recs = [o.record for o in sweep(cfgs) if o.record.status == "ok"]
            if not recs:
                print(f"{conn:4d} {mode:>6}  no solved runs")
                continue
            red = statistics.mean(r.reduction_pct for r in recs)
            ev = statistics.mean(r.intersections_introduced for r in recs)
            share = statistics.mean((r.solve_time_total - r.solve_time_pibt) / r.solve_time_total for r in recs)
            print(f"{conn:4d} {mode:>6} {red:11.2f} {ev:7.1f} {share:15.3f}")


if __name__ == "__main__":
    main()
