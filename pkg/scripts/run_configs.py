"""Run every configs/*.cfg scenario (except verify) and report exit codes.

usage: python3 scripts/run_configs.py [--out DIR]
"""

import argparse
import sys
from pathlib import Path

from edge_spectral_lab.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(ROOT / "out"))
    args = ap.parse_args()
    worst = 0
    for cfg in sorted((ROOT / "configs").glob("*.cfg")):
        if cfg.stem == "verify":
            continue
        rc = cli_main([str(cfg), "--out", str(Path(args.out) / cfg.stem)])
        print(f"{cfg.name}: exit {rc}", flush=True)
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(main())
