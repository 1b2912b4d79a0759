#!/usr/bin/env python3
"""Scan reference-loss anchors for feasibility rate and power level.

The log-distance model needs a reference loss at 10 m. The free-space value
at 1.9 GHz (+58 dB) leaves cell-edge energy receivers unservable, so the
shipped config uses a negative anchor, a bulk link gain standing in for the
unmodeled array and calibration factors. This script reproduces the scan that
picked the value:
for each candidate anchor and each scenario cell, solve the full-cooperation
power-minimization problem on a batch of seeded channel draws and report how
many come back feasible, plus the median transmit power of the feasible ones.

Run time is tens of minutes for the default grid; trim --trials or --anchors
for a quick look.
"""

import argparse
import sys

import numpy as np

from comp_swipt.baselines import full_cooperation
from comp_swipt.network import build_topology, sample_channels
from comp_swipt.params import SystemParams
from comp_swipt.reweighted import InfeasibleInstanceError, SolverBreakdownError
from comp_swipt.units import mw_to_dbm

# (label, seed tag, scenario overrides). The tag feeds the seed sequence, so
# every cell sees its own stream regardless of which cells are enabled.
CELLS = [
    ("K5 L3 M2 nt2", 1, dict(n_ir=5, n_rrh=3, n_er=2, n_t=2)),
    ("K5 L3 M2 nt6", 2, dict(n_ir=5, n_rrh=3, n_er=2, n_t=6)),
    ("K3 L2 M1 nt2", 3, dict(n_ir=3, n_rrh=2, n_er=1, n_t=2)),
    ("K2 L2 M1 nt2", 4, dict(n_ir=2, n_rrh=2, n_er=1, n_t=2)),
]


def scan_cell(anchor_db, tag, overrides, trials, seed):
    params = SystemParams(path_loss_ref_db=anchor_db, **overrides)
    feasible = 0
    powers = []
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, tag, trial]))
        topo = build_topology(params, rng)
        ch = sample_channels(topo, params, rng)
        try:
            report = full_cooperation(ch, params)
        except (InfeasibleInstanceError, SolverBreakdownError):
            continue
        if report.feasible:
            feasible += 1
            powers.append(report.tx_power_mw)
    median_dbm = float(mw_to_dbm(np.median(powers))) if powers else float("nan")
    return feasible, median_dbm


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--anchors", type=float, nargs="+",
                    default=[-38.0, -40.0, -42.0, -45.0, -50.0],
                    help="candidate path_loss_ref_db values")
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--seed", type=int, default=555)
    args = ap.parse_args(argv)

    header = f"{'anchor':>8}  " + "  ".join(f"{label:>18}" for label, _, _ in CELLS)
    print(header)
    print("-" * len(header))
    for anchor in args.anchors:
        row = [f"{anchor:8.1f}"]
        for _, tag, overrides in CELLS:
            n_ok, med = scan_cell(anchor, tag, overrides, args.trials, args.seed)
            row.append(f"{n_ok:3d}/{args.trials}  {med:6.1f} dBm")
        print("  ".join(row))
    print("\ncolumns: feasible count / trials, median feasible tx power")
    return 0


if __name__ == "__main__":
    sys.exit(main())
