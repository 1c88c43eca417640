#!/usr/bin/env python3
"""Run the hysteresis sweep and print a summary table.

Usage: python scripts/run_sweep.py [--out DIR]

Runs the three controlled scenarios plus the free run and reports final
variance ratios, switch counts, consensus flags and wall times.  With --out,
full trajectory logs and snapshots are written per scenario.
"""
import argparse
import time
from pathlib import Path

from mfjq.cli import main as cli_main
from mfjq.scenarios import ScenarioSpec, run_hk_controlled, run_hk_uncontrolled


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, help="write full run outputs here")
    args = ap.parse_args()

    rows = []
    for name in ("hk_free", "hk_ctrl_h02", "hk_ctrl_h05", "hk_ctrl_h09"):
        spec = ScenarioSpec.builtin(name)
        t0 = time.perf_counter()
        if spec.controller is None:
            log, rep = run_hk_uncontrolled(spec)
            h = "-"
        else:
            log, rep = run_hk_controlled(spec)
            h = spec.controller["h"]
        wall = time.perf_counter() - t0
        v = log.V
        rows.append((name, h, v[-1] / v[0], log.n_switches, rep.n_clusters,
                     rep.consensus, wall))
        if args.out is not None:
            cli_main(["run", "--scenario", name, "--out",
                      str(args.out / name)])

    print(f"{'scenario':<14} {'h':>4} {'V(T)/V(0)':>11} {'switches':>9} "
          f"{'clusters':>9} {'consensus':>10} {'wall[s]':>8}")
    for name, h, ratio, sw, nc, cons, wall in rows:
        print(f"{name:<14} {h!s:>4} {ratio:>11.3e} {sw:>9} {nc:>9} "
              f"{cons!s:>10} {wall:>8.1f}")


if __name__ == "__main__":
    main()
