"""Write the synthetic stand-in maps and random scenarios to a directory.

    python scripts/make_standins.py data/standins

The maps only substitute for the MovingAI benchmark files when those are
not available; see README.
"""

import argparse
from pathlib import Path

from pibtsmooth.synthetic import write_standins


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=Path, nargs="?", default=Path("data/standins"))
    ap.add_argument("--agents", type=int, default=500)
    ap.add_argument("--scenarios", type=int, default=25)
    args = ap.parse_args()
    for path in write_standins(args.out, args.agents, args.scenarios):
        print(path)


if __name__ == "__main__":
    main()
