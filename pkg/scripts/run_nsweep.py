"""n-sweep: two-layer tanh networks of increasing width at fixed M.

    python3 scripts/run_nsweep.py [configs/experiment1_nsweep.yaml] [--out DIR]

Writes sweep.csv / sweep.json and prints one line per width. Use
configs/experiment1_full.yaml for the full-scale grid (hours of CPU).
"""

import argparse
import sys
from pathlib import Path

from lgnet.cli import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default=str(ROOT / "configs" / "experiment1_nsweep.yaml"))
    ap.add_argument("--out")
    ap.add_argument("--jobs", type=int, default=1)
    a = ap.parse_args()
    argv = ["sweep", "--config", a.config, "--kind", "n", "--jobs", str(a.jobs), "-v"]
    sys.exit(main(argv + (["--out", a.out] if a.out else [])))
