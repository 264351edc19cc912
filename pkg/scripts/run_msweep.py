"""M-sweep: the 5 x 128 tanh network trained on growing sample counts.

    python3 scripts/run_msweep.py [configs/experiment2_msweep.yaml] [--out DIR]

Smaller training sets are prefixes of larger ones (same seed), so the
points are nested. configs/experiment2_full.yaml has the full-scale grid.
"""

import argparse
import sys
from pathlib import Path

from lgnet.cli import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("config", nargs="?", default=str(ROOT / "configs" / "experiment2_msweep.yaml"))
    ap.add_argument("--out")
    ap.add_argument("--jobs", type=int, default=1)
    a = ap.parse_args()
    argv = ["sweep", "--config", a.config, "--kind", "m", "--jobs", str(a.jobs), "-v"]
    sys.exit(main(argv + (["--out", a.out] if a.out else [])))
