#!/usr/bin/env python3
"""Run the desk-scale hidden-unit sweep and print the adjusted-units
comparison table.

Finishes in a few minutes. Writes sweep.csv and summary.json into the
output directory (default: results/desk).
"""

import argparse
import sys
from statistics import median

from urnn_equiv.experiment import desk_preset, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/desk")
    parser.add_argument("--seeds", default="0,1,2", help="comma-separated realization seeds")
    args = parser.parse_args()

    config = desk_preset(seeds=tuple(int(s) for s in args.seeds.split(",")))
    rows, n_failed = run_experiment(config, args.out)

    by_cell = {}
    for row in rows:
        if row["test_r2"] is not None:
            by_cell.setdefault((row["mode"], row["hidden_units"]), []).append(row["test_r2"])

    print(f"\n{'mode':8s} {'units':>5s} {'adj':>5s} {'median R^2':>11s}")
    for (mode, units), scores in sorted(by_cell.items()):
        adj = units // 2 if mode == "urnn" else units
        print(f"{mode:8s} {units:5d} {adj:5d} {median(scores):11.4f}")

    print("\nadjusted-units pairing (urnn at 2k vs rnn at k):")
    for k in config.units_for("rnn"):
        rnn_med = median(by_cell[("rnn", k)])
        urnn_med = median(by_cell[("urnn", 2 * k)])
        print(f"  k={k:2d}: urnn {urnn_med:.4f} vs rnn {rnn_med:.4f} (diff {urnn_med - rnn_med:+.4f})")

    if n_failed:
        print(f"{n_failed} cells diverged", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
