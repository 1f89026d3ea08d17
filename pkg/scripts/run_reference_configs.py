#!/usr/bin/env python3
"""Run the two reference configurations end to end and write all artifacts.

The small cart mass (M=0.1) gives intersecting boundary arcs and a connected
admissible set; the large cart mass (M=0.5) gives no intersections and a
periodic pair of disjoint admissible components (one bounded, one not).

Outputs per configuration: endpoints.csv, per-arc CSVs, stopping_points.csv,
model.json, barrier.svg and oracle.csv inside out/<name>/.
"""

import sys
import time
from pathlib import Path

from pendulum_barrier.cli import main

CONFIGS = {
    "connected_M0.1": ["--M", "0.1", "--m", "0.1", "--l", "1", "--g", "10"],
    "disjoint_M0.5": ["--M", "0.5", "--m", "0.1", "--l", "1", "--g", "10"],
}


def run() -> int:
    base = Path("out")
    for name, flags in CONFIGS.items():
        out = base / name
        print(f"=== {name} -> {out}")
        t0 = time.time()
        rc = main(["barrier", *flags, "--out", str(out)])
        if rc != 0:
            return rc
        rc = main(["endpoints", *flags, "--out", str(out), "--proof-log"])
        if rc != 0:
            return rc
        rc = main(["oracle", *flags, "--out", str(out), "--oracle-grid-n", "40"])
        if rc != 0:
            return rc
        print(f"    done in {time.time() - t0:.1f}s")
    print(f"all artifacts in {base.resolve()}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
