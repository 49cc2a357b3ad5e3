#!/usr/bin/env python3
"""Render PAoI / PLR curves from one or more sweep CSV files.

Usage:
    plot_sweep.py out_fcfs.csv out_prrt.csv ... [-y plr] [-o curves.png]

Each file contributes one curve (mean over replications per sweep value),
labelled by its discipline/setting columns.
"""

import argparse
import collections
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load(path, ycol):
    points = collections.defaultdict(list)
    label = None
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            x = float(row["sweep_value"])
            points[x].append(float(row[ycol]))
            if label is None:
                if row["mode"] == "dmo":
                    label = f"dmo setting {row['setting']} ({row['fr_discipline']}/{row['gw_discipline']})"
                else:
                    label = f"tmo {row['fr_discipline']}"
    xs = sorted(points)
    ys = [sum(points[x]) / len(points[x]) for x in xs]
    return xs, ys, label or path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csvs", nargs="+")
    ap.add_argument("-y", default="mean_paoi_s", help="CSV column to plot (default mean_paoi_s)")
    ap.add_argument("-o", default="sweep.png")
    ap.add_argument("--log", action="store_true", help="log-scale y axis")
    args = ap.parse_args()

    for path in args.csvs:
        xs, ys, label = load(path, args.y)
        plt.plot(xs, ys, marker="o", label=label)
    plt.xlabel("message generation rate per first responder (msg/s)")
    plt.ylabel(args.y)
    if args.log:
        plt.yscale("log")
    plt.grid(True, alpha=0.4)
    plt.legend()
    plt.tight_layout()
    plt.savefig(args.o, dpi=150)
    print(f"wrote {args.o}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
