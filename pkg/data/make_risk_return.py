"""Regenerate risk_return_30.csv: 30 synthetic assets, downside semideviation (input) and mean return (output).

Returns grow concavely with risk and each asset keeps a random share of
the attainable return, so a handful of assets form the frontier.
"""

import csv
from pathlib import Path

import numpy as np


def make(seed=104, count=30):
    rng = np.random.default_rng(seed)
    semidev = np.round(rng.uniform(0.04, 0.30, count), 4)
    avgret = np.round(0.75 * semidev**0.75 * rng.uniform(0.45, 1.0, count), 4)
    return semidev, avgret


if __name__ == "__main__":
    semidev, avgret = make()
    with open(Path(__file__).with_name("risk_return_30.csv"), "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["id", "semidev", "avgret"])
        for k, (x, y) in enumerate(zip(semidev, avgret)):
            out.writerow([f"S{k + 1:02d}", f"{x:.4f}", f"{y:.4f}"])
